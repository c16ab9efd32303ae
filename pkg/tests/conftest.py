import pytest

from logsieve.corpus import LogDocument, LogLine, normalize_line

_CRITERIA: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "criterion(id, title): tag a test as part of an acceptance criterion"
    )


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when != "call":
        return
    cid, title = marker.args
    entry = _CRITERIA.setdefault(
        cid, {"title": title, "passed": 0, "failed": 0, "xfailed": 0, "skipped": 0}
    )
    if hasattr(report, "wasxfail"):
        entry["xfailed" if report.skipped else "failed"] += 1
    elif report.skipped:
        entry["skipped"] += 1
    elif report.passed:
        entry["passed"] += 1
    else:
        entry["failed"] += 1


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _CRITERIA:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for cid in sorted(_CRITERIA):
        entry = _CRITERIA[cid]
        if entry["failed"]:
            status = "FAIL"
        elif entry["passed"] == 0 and entry["skipped"]:
            status = "SKIP"
        elif entry["xfailed"]:
            status = "PARTIAL"
        else:
            status = "PASS"
        detail = f"{entry['passed']} passed"
        if entry["failed"]:
            detail += f", {entry['failed']} failed"
        if entry["xfailed"]:
            detail += f", {entry['xfailed']} known-unreproducible"
        if entry["skipped"]:
            detail += f", {entry['skipped']} skipped"
        terminalreporter.write_line(
            f"criterion {cid:2d} {entry['title']}: {status} ({detail})"
        )


def build_document(contents, repo="acme/widget", run_id="42", conclusion="failure"):
    """Document from raw line texts, running each through normalization."""
    lines = []
    for i, raw in enumerate(contents):
        timestamp, content = normalize_line(raw)
        lines.append(LogLine(index=i, timestamp=timestamp, content=content, raw=raw))
    return LogDocument(repo=repo, run_id=run_id, conclusion=conclusion, lines=tuple(lines))


@pytest.fixture
def tiny_doc():
    return build_document(
        [
            "2025-05-01T04:19:28.9669135Z Set up job",
            "2025-05-01T04:19:29.6442057Z Loading package information...",
            "2025-05-01T04:23:19.7676299Z Execution failed for task ':app:compileDebugJava'.",
            "plain line without timestamp",
            "",
        ]
    )
