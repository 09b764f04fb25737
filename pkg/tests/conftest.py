import sys


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, 11):
        ok, detail = mod.RESULTS.get(n, (None, "not run"))
        status = {True: "PASS", False: "FAIL", None: "NOT RUN"}[ok]
        terminalreporter.write_line(f"criterion {n:2d}: {status}  {detail}")
