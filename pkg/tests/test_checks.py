import numpy as np

from asrga.checks import (
    SUITES,
    PropertyResult,
    bundled_trace,
    check_gradients,
    check_rate,
    run_suite,
    synthetic_trace,
)


def test_every_suite_passes():
    for name in SUITES:
        results = run_suite(name)
        assert results
        assert all(r.passed for r in results), [r.line() for r in results if not r.passed]


def test_corrupted_gradient_is_caught():
    results = check_gradients(corrupt=lambda G: 1.001 * G)
    fd = [r for r in results if "finite differences" in r.name]
    assert fd and not any(r.passed for r in fd)


def test_bundled_trace_is_long_enough():
    trace = bundled_trace()
    assert trace[-1].k == 1000
    assert all(r.metric is not None for r in trace)


def test_rate_suite_flags_bad_trace():
    results = check_rate(trace=synthetic_trace(np.ones(500)), p=0.5)
    assert not results[0].passed


def test_result_line_reports_slack():
    r = PropertyResult("x", 0.25, 1.0, True)
    assert r.slack == 0.75
    assert r.line().startswith("PASS  x: measured 2.500e-01 <= 1.000e+00")
    assert PropertyResult("y", 3.0, 1.5, True, ">").slack == 1.5
