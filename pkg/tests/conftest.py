"""Terminal summary hook: one verdict line per numbered acceptance test."""

import re

_CRIT = re.compile(r"test_criterion_(\d+)")

_LABELS = {
    1: "kernel hypothesis suite, unit mass, inverse round-trips",
    2: "FFT convolution matches the direct sum",
    3: "accelerating front tracks f_inv(t)",
    4: "envelope sandwich holds with decaying residual",
    5: "gradient bound |phi_x| <= theta1 * phi",
    6: "log-potential converges to max(f - t, 0)",
    7: "rescaled jump kernel mass and second-moment identities",
    8: "a-priori potential bounds, slope cap, decay condition",
    9: "Hamiltonian closed form, evenness, kappa sandwich",
    10: "constrained HJ exactness and monotonicity controls",
    11: "rescaled runs approach the HJ solution monotonically",
    12: "zero-set inclusion curves and limit densities",
    13: "byte-identical reruns",
}

_verdicts = {}


def pytest_runtest_logreport(report):
    m = _CRIT.search(report.nodeid)
    if not m:
        return
    num = int(m.group(1))
    if report.failed or report.skipped:
        _verdicts[num] = False
    elif report.when == "call" and report.passed:
        _verdicts.setdefault(num, True)


def pytest_terminal_summary(terminalreporter):
    if not _verdicts:
        return
    tr = terminalreporter
    tr.write_sep("-", "acceptance criteria")
    for num in sorted(_verdicts):
        verdict = "PASS" if _verdicts[num] else "FAIL"
        tr.write_line("criterion %02d %s  %s"
                      % (num, verdict, _LABELS.get(num, "")))
