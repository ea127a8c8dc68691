import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from asrga.bench import (
    TRACE_HEADER,
    RunReport,
    SyntheticKind,
    SyntheticSpec,
    build_report,
    dpcp_error,
    generate,
    metric_for,
    rate_report,
    read_report,
    read_trace,
    sdl_error,
    trace_summary,
    window_best_norms,
    write_trace,
)
from asrga.checks import synthetic_trace
from asrga.composite import build_problem, true_value
from asrga.errors import DimensionError, ParameterError, UnavailableError
from asrga.manifolds import ManifoldSpec, orthonormality_residual, random_point
from asrga.solvers import AsrgaConfig, IterationTrace, run_asrga

SDL = SyntheticKind.SDL_BERNOULLI_GAUSSIAN
DPCP = SyntheticKind.DPCP_INLIER_OUTLIER
SPCA = SyntheticKind.SPCA_GAUSSIAN


# --- generators --------------------------------------------------------------


def test_sdl_sparsity_fraction():
    inst = generate(SyntheticSpec(SDL, n=4, m=80, theta=0.5, seed=11))
    frac = np.count_nonzero(inst.extras["S"]) / inst.extras["S"].size
    # 3 sigma of Binomial(320, 0.5) / 320 is 0.084
    assert 0.35 <= frac <= 0.65


def test_sdl_exact_reconstruction():
    inst = generate(SyntheticSpec(SDL, n=5, seed=0))
    np.testing.assert_array_equal(inst.data, inst.ground_truth @ inst.extras["S"])
    assert orthonormality_residual(inst.ground_truth) < 1e-12
    assert inst.data.shape == (5, math.floor(10 * 5**1.5))


def test_dpcp_truth_beats_random_directions_without_outliers():
    inst = generate(SyntheticSpec(DPCP, n=4, m=200, outlier_ratio=0.0, seed=3))
    prob = build_problem(inst, 0.5)
    f_star = true_value(prob, inst.ground_truth)
    # inlier residuals are zero up to rounding, |1e-16|^0.5 per point
    assert f_star < 1e-5
    rand = [true_value(prob, random_point(prob.manifold, s)) for s in range(100)]
    assert f_star < min(rand)


def test_dpcp_composition():
    inst = generate(SyntheticSpec(DPCP, n=4, inliers=30, outliers=20, noise=0.0, seed=1))
    assert inst.data.shape == (50, 4)
    mask = inst.extras["inlier_mask"]
    assert mask.sum() == 30
    b = inst.ground_truth.ravel()
    np.testing.assert_allclose(inst.data[mask] @ b, 0, atol=1e-14)
    np.testing.assert_allclose(np.linalg.norm(inst.data, axis=1), 1, rtol=1e-14)


def test_dpcp_orthonormalized_basis_keeps_truth():
    inst = generate(SyntheticSpec(DPCP, n=4, inliers=50, outliers=10, orthonormalize=True, seed=2))
    mask = inst.extras["inlier_mask"]
    np.testing.assert_allclose(inst.data.T @ inst.data, np.eye(4), atol=1e-12)
    np.testing.assert_allclose(inst.data[mask] @ inst.ground_truth, 0, atol=1e-12)
    with pytest.raises(DimensionError):
        generate(SyntheticSpec(DPCP, n=4, inliers=50, outliers=0, orthonormalize=True))


def test_spca_preprocessing():
    inst = generate(SyntheticSpec(SPCA, n=6, s=2, m=40, seed=0))
    A = inst.data
    np.testing.assert_allclose(np.linalg.norm(A, axis=1), 1, rtol=1e-14)
    np.testing.assert_allclose(A.sum(axis=1), 0, atol=1e-12)


@pytest.mark.parametrize("kind", list(SyntheticKind))
def test_generation_deterministic(kind):
    spec = SyntheticSpec(kind, n=4, s=2 if kind is SPCA else 1, m=30, seed=7)
    a, b = generate(spec), generate(spec)
    assert a.data.tobytes() == b.data.tobytes()
    if a.ground_truth is not None:
        assert a.ground_truth.tobytes() == b.ground_truth.tobytes()


def test_data_independent_of_start_point():
    inst = generate(SyntheticSpec(SDL, n=4, seed=0))
    X0 = random_point(ManifoldSpec.orthogonal(4), 0)
    assert sdl_error(X0, inst.ground_truth) > 1e-3


@pytest.mark.parametrize(
    "kwargs",
    [
        {"theta": 0.0},
        {"theta": 1.0},
        {"outlier_ratio": 1.0},
        {"outlier_ratio": -0.1},
        {"m": 0},
        {"noise": -1.0},
        {"inliers": -3},
    ],
)
def test_invalid_specs(kwargs):
    with pytest.raises((ParameterError, DimensionError)):
        SyntheticSpec(SDL, n=4, **kwargs)


# --- metrics -----------------------------------------------------------------


def test_sdl_error_identity_and_permutation():
    X = random_point(ManifoldSpec.orthogonal(4), 0)
    assert sdl_error(X, X) == pytest.approx(0, abs=1e-14)
    Y = X[:, [2, 0, 3, 1]] * np.array([1, -1, 1, 1])
    assert sdl_error(Y, X) == pytest.approx(0, abs=1e-14)


def test_sdl_error_rotation_example():
    c = math.sqrt(2) / 2
    R = np.array([[c, -c], [c, c]])
    assert sdl_error(R, np.eye(2)) == pytest.approx(2 * (1 - c), rel=1e-14)
    assert sdl_error(R, np.eye(2)) == pytest.approx(0.58579, abs=1e-5)


def test_sdl_error_shape_mismatch():
    with pytest.raises(DimensionError):
        sdl_error(np.eye(3), np.eye(2))


def test_dpcp_error_examples():
    x = random_point(ManifoldSpec.sphere(4), 0)
    assert dpcp_error(x, x) == pytest.approx(0, abs=1e-7)
    assert dpcp_error(-x, x) == pytest.approx(0, abs=1e-7)
    assert dpcp_error(np.eye(3)[0], np.eye(3)[1]) == 1.0


def test_dpcp_error_rejects_non_unit():
    with pytest.raises(ParameterError):
        dpcp_error(np.array([1.0, 1.0]), np.array([1.0, 0.0]))
    with pytest.raises(DimensionError):
        dpcp_error(np.eye(3)[0], np.eye(2)[0])


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**31), n=st.integers(2, 6))
def test_sdl_error_invariance(seed, n):
    rng = np.random.default_rng(seed)
    X = random_point(ManifoldSpec.orthogonal(n), seed)
    T = random_point(ManifoldSpec.orthogonal(n), seed + 1)
    perm = rng.permutation(n)
    signs = rng.choice([-1.0, 1.0], n)
    e = sdl_error(X, T)
    assert e >= 0
    assert sdl_error(X[:, perm] * signs, T) == pytest.approx(e, abs=1e-12)
    assert sdl_error(X, T * signs) == pytest.approx(e, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(a=st.floats(0, math.pi / 2), b=st.floats(0, math.pi / 2))
def test_dpcp_error_monotone_in_angle(a, b):
    ref = np.array([1.0, 0.0])
    ea = dpcp_error(np.array([math.cos(a), math.sin(a)]), ref)
    eb = dpcp_error(np.array([math.cos(b), math.sin(b)]), ref)
    assert 0 <= ea <= 1 and 0 <= eb <= 1
    if a < b:
        assert ea <= eb + 1e-15


def test_metric_for_kinds():
    inst = generate(SyntheticSpec(SDL, n=3, seed=0))
    assert metric_for(inst)(inst.ground_truth) == pytest.approx(0, abs=1e-14)
    inst = generate(SyntheticSpec(DPCP, n=3, m=20, seed=0))
    assert metric_for(inst)(inst.ground_truth) == pytest.approx(0, abs=1e-7)
    inst = generate(SyntheticSpec(SPCA, n=3, s=1, m=20, seed=0))
    prob = build_problem(inst, 1.0)
    X = random_point(prob.manifold, 0)
    assert metric_for(inst, prob)(X) == true_value(prob, X)
    assert metric_for(inst) is None


# --- trace files -------------------------------------------------------------


rows = st.builds(
    IterationTrace,
    k=st.integers(0, 10**9),
    mu=st.floats(allow_nan=False, allow_infinity=False),
    eta=st.floats(allow_nan=False, allow_infinity=False),
    step=st.floats(allow_nan=False, allow_infinity=False),
    grad_norm=st.floats(allow_nan=False, allow_infinity=False),
    f_smooth=st.floats(allow_nan=False, allow_infinity=False),
    f_true=st.floats(allow_nan=False, allow_infinity=False),
    metric=st.none() | st.floats(allow_nan=False, allow_infinity=False),
    elapsed_s=st.floats(0, 1e6),
)


@settings(max_examples=50, deadline=None)
@given(trace=st.lists(rows, max_size=20))
def test_trace_roundtrip(tmp_path_factory, trace):
    path = tmp_path_factory.mktemp("t") / "trace.csv"
    write_trace(path, trace)
    assert read_trace(path) == trace


def test_trace_format(tmp_path):
    path = tmp_path / "t.csv"
    write_trace(path, [IterationTrace(3, 0.1, 2.0, 0.5, 1e-3, 1.0, 2.0, None, 0.0)])
    lines = path.read_text().splitlines()
    assert lines[0] == TRACE_HEADER
    assert lines[1] == "3,0.10000000000000001,2,0.5,0.001,1,2,,0"


def test_trace_stride(tmp_path):
    trace = synthetic_trace(np.ones(10))
    write_trace(tmp_path / "t.csv", trace, stride=4)
    assert [r.k for r in read_trace(tmp_path / "t.csv")] == [1, 5, 9, 10]


def test_trace_bad_file(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("k,mu\n1,2\n")
    with pytest.raises(ParameterError):
        read_trace(path)
    path.write_text(TRACE_HEADER + "\n1,2,3\n")
    with pytest.raises(ParameterError, match="line 2"):
        read_trace(path)


# --- rate statistic ----------------------------------------------------------


def test_rate_negative_control_flagged():
    rep = rate_report(synthetic_trace(np.ones(1000)), 0.5)
    assert rep.violated and rep.ratio > 1.5


def test_rate_positive_control_constant():
    k = np.arange(1, 1001)
    rep = rate_report(synthetic_trace(3.0 / k ** (1 / 3.5)), 0.5)
    assert rep.ratio == pytest.approx(1.0, abs=1e-12)
    assert not rep.violated


def test_rate_needs_long_trace():
    with pytest.raises(UnavailableError):
        rate_report(synthetic_trace(np.ones(50)), 0.5)


def test_rate_real_sdl_run():
    inst = generate(SyntheticSpec(SDL, n=10, seed=0))
    res = run_asrga(build_problem(inst, 0.5), AsrgaConfig(max_iters=2000))
    assert rate_report(res.trace, 0.5).ratio <= 1.5


@settings(max_examples=50, deadline=None)
@given(norms=st.lists(st.floats(0, 5), min_size=1, max_size=80))
def test_window_best_norms_brute_force(norms):
    trace = synthetic_trace(norms)
    got = window_best_norms(trace)
    for k in range(1, len(norms) + 1):
        assert got[k - 1] == min(norms[max(k // 2, 1) - 1 : k])


# --- reports -----------------------------------------------------------------


def test_report_roundtrip_and_reproducible_from_trace(tmp_path):
    inst = generate(SyntheticSpec(SDL, n=4, seed=0))
    prob = build_problem(inst, 0.5)
    res = run_asrga(prob, AsrgaConfig(max_iters=300), metric=metric_for(inst))
    write_trace(tmp_path / "asrga_trace.csv", res.trace)
    rep = build_report(res, res.trace, 0.5, "sdl", 0, "asrga_trace.csv", {"asrga.eta0": 1e-6})
    rep.write(tmp_path / "r.txt")
    back = read_report(tmp_path / "r.txt")
    assert isinstance(back, RunReport)
    summary = trace_summary(read_trace(tmp_path / "asrga_trace.csv"), 0.5)
    for key, val in summary.items():
        assert getattr(back, key) == val
    assert back.best_grad_norm == res.grad_norm
    assert back.best_k == res.k_best
    assert back.config == {"asrga.eta0": "9.9999999999999995e-07"}
    assert back.stop_reason == "max_iters" and back.iterations == 300
