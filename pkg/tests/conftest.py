"""Collects the acceptance results and prints one verdict line per criterion."""

_verdicts: dict[str, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    props = dict(report.user_properties)
    label = props.get("criterion")
    if label is None:
        return
    if report.when == "call" or report.failed:
        verdict = "PASS" if report.passed else "FAIL"
        _verdicts[label] = (verdict, props.get("measured", ""))


def pytest_terminal_summary(terminalreporter):
    if not _verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(_verdicts, key=lambda s: int(s.split()[0])):
        verdict, measured = _verdicts[label]
        terminalreporter.write_line(f"criterion {label}: {verdict}  {measured}".rstrip())
