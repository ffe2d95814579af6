import pytest

from porositykit.catalog import cluster, dyadic, harmonic, M2_FACTORS
from porositykit.derivative import (
    MapSpec,
    Piece,
    check_differentiable,
    local_constancy_audit,
    local_constancy_radius,
    metric_derivative,
)
from porositykit.distance_sets import from_sequence, scale_set, union
from porositykit.exact import INF, PreconditionError, Q, SpecError, TailWindow
from porositykit.pretangent import LineSet, OracleSpace, PointSequence, build_pretangent, extremal_space
from porositykit.sequences import DyadicGaussian, Scaled, Subsequence

W = TailWindow(8, 64)
X = DyadicGaussian(1)
E = from_sequence(X)
LINE = LineSet(E)
SEEDS = [PointSequence("x", X), PointSequence("y", Subsequence("n+1", X))]


def test_map_spec():
    g = MapSpec("x", (Piece("3*x", lo=Q(1, 4), hi=Q(1, 2)),))
    assert (g(Q(1, 3)), g(Q(1, 2)), g(0)) == (1, Q(1, 2), 0)
    assert MapSpec.dilation(Q(3, 2))(Q(2)) == 3
    with pytest.raises(SpecError):
        MapSpec("x+1")
    with pytest.raises(SpecError):
        Piece("x")


def test_identity_is_differentiable():
    v = check_differentiable(MapSpec.identity(), LINE, SEEDS, X, W)
    assert v and v.pair is None


def test_doubling_doubles_distances():
    d = metric_derivative(MapSpec.dilation(2), LINE, SEEDS, X, W, space2=LineSet(scale_set(E, 2)))
    assert d.consistent
    src, tgt = d.source, d.target
    x_src, x_tgt = src.class_of("x"), tgt.class_of("f(x)")
    assert d.class_map[x_src] == x_tgt
    assert tgt.dist[tgt.marked][x_tgt] == 2 * src.dist[src.marked][x_src] == 2


def test_doubling_with_doubled_scaling_preserves_distances():
    d = metric_derivative(MapSpec.dilation(2), LINE, SEEDS, X, W, space2=LineSet(scale_set(E, 2)), r2=Scaled(2, X))
    assert d.target.dist == d.source.dist


def test_doubling_on_even_terms_is_not_differentiable():
    even = from_sequence(Subsequence("2*n", X))
    g = MapSpec("x", (Piece("2*x", member_of=even),), name="doubling on even terms")
    v = check_differentiable(g, LINE, SEEDS, X, W, space2=LineSet(union(E, scale_set(E, 2))))
    assert not v
    assert v.pair == ("p", "f(x)")
    assert "Oscillates[1, 2]" in v.reason
    with pytest.raises(PreconditionError):
        metric_derivative(g, LINE, SEEDS, X, W, space2=LineSet(union(E, scale_set(E, 2))))


def test_image_outside_target_is_not_differentiable():
    v = check_differentiable(MapSpec.dilation(3), LINE, SEEDS, X, W)
    assert not v and "leaves the target space" in v.reason


def test_local_constancy_radius():
    line = OracleSpace(lambda x, y: abs(x - y), Q(0))
    r = lambda n: Q(1, 2**n)
    sp = build_pretangent(line, [PointSequence("x", lambda n: Q(3, 2) * r(n))], r, W)
    assert local_constancy_radius(sp, {0: 0, 1: 1}) == Q(3, 2)
    assert local_constancy_radius(sp, lambda i: 0) == INF
    lower = extremal_space(dyadic(), kind="lower").space
    assert local_constancy_radius(lower, {i: i for i in range(len(lower))}) == lower.rho_lower() == 1


def test_audit_on_dyadic_set():
    a = local_constancy_audit(dyadic())
    assert a.passed and a.M == 1 and a.sharp_radius == 1
    assert {row.map for row in a.rows} >= {"identity", "x -> 2x"}


def test_audit_on_cluster_set():
    a = local_constancy_audit(cluster(M2_FACTORS))
    assert a.passed and a.bound == Q(1, 2) and a.sharp_radius == Q(1, 2)
    assert all(row.radius == INF or row.radius >= a.bound for row in a.rows)


def test_audit_needs_csp():
    with pytest.raises(PreconditionError):
        local_constancy_audit(harmonic())
