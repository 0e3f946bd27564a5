"""Aggregates acceptance-criterion outcomes into one summary line each."""

import collections
import re

CRITERION_NAMES = {
    1: "reference table reproduction, n=3..8",
    2: "single-round optimum (n-1)(n-2)",
    3: "optimum inside the exact bounds, n<=30",
    4: "complement-pairing mean delay (q-1)^(n^2)",
    5: "round-probability exponent convergence",
    6: "signed zero-sum probability closed form",
    7: "end-to-end decode property suite",
    8: "large-network scaling trends",
    9: "beamforming dominance",
}

_RESULTS = collections.defaultdict(lambda: {"passed": 0, "xfailed": 0, "failed": 0})


def pytest_runtest_logreport(report):
    m = re.search(r"test_criterion_(\d+)", report.nodeid)
    if m is None:
        return
    crit = int(m.group(1))
    if report.when == "call":
        if hasattr(report, "wasxfail"):
            _RESULTS[crit]["xfailed" if report.skipped else "failed"] += 1
        elif report.passed:
            _RESULTS[crit]["passed"] += 1
        elif report.failed:
            _RESULTS[crit]["failed"] += 1
    elif report.failed:
        _RESULTS[crit]["failed"] += 1


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(CRITERION_NAMES):
        if crit not in _RESULTS:
            continue
        c = _RESULTS[crit]
        if c["failed"]:
            status = "FAIL"
        elif c["xfailed"]:
            status = ("FAIL as expected: reference values contradict the exact "
                      "optimizer (see expected-failure notes in test_acceptance)")
        else:
            status = "PASS"
        terminalreporter.write_line(
            f"criterion {crit} ({CRITERION_NAMES[crit]}): {status} "
            f"[{c['passed']} passed, {c['xfailed']} expected-fail, "
            f"{c['failed']} failed]"
        )
