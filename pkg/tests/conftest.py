def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion; a criterion passes when
    every test recording it passes."""
    results = {}
    for outcome in ("passed", "failed"):
        for rep in terminalreporter.stats.get(outcome, []):
            props = dict(rep.user_properties)
            if rep.when != "call" or "criterion" not in props:
                continue
            key = (props["order"], props["criterion"])
            results[key] = results.get(key, True) and rep.passed
    if results:
        terminalreporter.section("acceptance criteria")
        for (order, text), ok in sorted(results.items()):
            terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {order + 1}. {text}")
