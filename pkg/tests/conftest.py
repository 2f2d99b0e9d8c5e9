def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key, (passed, detail) in RESULTS.items():
        terminalreporter.write_line(f"criterion {key:>3}: {'PASS' if passed else 'FAIL'}  {detail}")
