"""Local porosity at 0, complete strong porosity and pretangent spaces of
subsets of the half-line, computed in exact rational arithmetic."""

__version__ = "0.1.0"

from .distance_sets import DistanceSet, from_sequence, gap_components, lambda_, porosity_upper, union
from .exact import Q, LimitEstimate, TailWindow
from .porosity import CSPKind, asymp_equivalent, csp_verdict
from .pretangent import LineSet, PointSequence, build_pretangent, family_bounds

__all__ = [
    "CSPKind",
    "DistanceSet",
    "LimitEstimate",
    "LineSet",
    "PointSequence",
    "Q",
    "TailWindow",
    "asymp_equivalent",
    "build_pretangent",
    "csp_verdict",
    "family_bounds",
    "from_sequence",
    "gap_components",
    "lambda_",
    "porosity_upper",
    "union",
]
