import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from asrga.errors import DimensionError, InfeasiblePointError, NumericError
from asrga.manifolds import (
    ManifoldKind,
    ManifoldSpec,
    Retraction,
    check_point,
    orthonormality_residual,
    polar_factor,
    project_tangent,
    random_point,
    retract,
    retract_info,
    tangency_residual,
)


def e(i, n):
    v = np.zeros((n, 1))
    v[i] = 1.0
    return v


# --- manifold validation -----------------------------------------------------


def test_spec_rules():
    assert ManifoldSpec.sphere(4).shape == (4, 1)
    assert ManifoldSpec.orthogonal(3).shape == (3, 3)
    with pytest.raises(DimensionError):
        ManifoldSpec(ManifoldKind.STIEFEL, 2, 3)
    with pytest.raises(DimensionError):
        ManifoldSpec(ManifoldKind.SPHERE, 3, 2)
    with pytest.raises(DimensionError):
        ManifoldSpec(ManifoldKind.ORTHOGONAL, 3, 2)


# --- projection examples -----------------------------------------------------


def test_sphere_normal_direction_projects_to_zero():
    np.testing.assert_array_equal(project_tangent(e(0, 3), e(0, 3)), np.zeros((3, 1)))


def test_sphere_tangent_direction_unchanged():
    np.testing.assert_array_equal(project_tangent(e(0, 3), e(1, 3)), e(1, 3))


def test_stiefel_identity_example():
    D = np.array([[0.0, 1.0], [0.0, 0.0]])
    P = project_tangent(np.eye(2), D)
    np.testing.assert_allclose(P, [[0, 0.5], [-0.5, 0]], atol=1e-15)
    # independent oracle: at X = I the tangent space is the skew matrices,
    # so the orthogonal projection is the skew part
    np.testing.assert_allclose(P, (D - D.T) / 2, atol=1e-15)


def test_projection_least_squares_oracle():
    # brute force: project onto the null space of D -> X^T D + D^T X
    rng = np.random.default_rng(0)
    spec = ManifoldSpec.stiefel(4, 2)
    X = random_point(spec, 1)
    D = rng.standard_normal(X.shape)
    n, s = X.shape
    rows = []
    for idx in range(n * s):
        E = np.zeros(n * s)
        E[idx] = 1
        E = E.reshape(n, s)
        rows.append((X.T @ E + E.T @ X).ravel())
    J = np.array(rows).T
    _, sv, Vt = np.linalg.svd(J)
    rank = int(np.sum(sv > 1e-10))
    N = Vt[rank:].T
    ref = (N @ (N.T @ D.ravel())).reshape(n, s)
    np.testing.assert_allclose(project_tangent(X, D), ref, atol=1e-12)


def test_projection_shape_mismatch():
    with pytest.raises(DimensionError):
        project_tangent(np.eye(3)[:, :2], np.zeros((3, 3)))


# --- retraction examples -----------------------------------------------------


def test_sphere_retraction_closed_form():
    Y = retract(e(0, 3), e(1, 3))
    np.testing.assert_allclose(Y, (e(0, 3) + e(1, 3)) / np.sqrt(2), atol=1e-15)


@pytest.mark.parametrize("spec", [ManifoldSpec.sphere(4), ManifoldSpec.stiefel(5, 2), ManifoldSpec.orthogonal(3)])
@pytest.mark.parametrize("method", [Retraction.POLAR, Retraction.QR])
def test_zero_direction_is_identity(spec, method):
    X = random_point(spec, 7)
    np.testing.assert_array_equal(retract(X, np.zeros_like(X), method), X)


def test_taylor_example_stiefel_2_1():
    X = e(0, 2)
    D = 0.01 * e(1, 2)
    ratios = [np.linalg.norm(retract(X, t * D) - X - t * D) / t**2 for t in (1e-2, 1e-3, 1e-4)]
    # (x + td)/||x + td|| - x - td = -t^2 ||d||^2 x / 2 + O(t^4); ||d||^2/2 = 5e-5
    np.testing.assert_allclose(ratios, 5e-5, rtol=1e-3)


def test_nonfinite_input_raises():
    X = e(0, 3)
    with pytest.raises(NumericError):
        retract(X, np.full((3, 1), np.nan))


def test_rank_collapse_falls_back_to_qr():
    X = np.eye(2)
    D = np.array([[0.0, 0.0], [0.0, -1.0]])  # X + D has a zero column
    Y, fell_back = retract_info(X, D)
    assert fell_back
    assert orthonormality_residual(Y) < 1e-12
    Y2, _ = retract_info(X, D)
    np.testing.assert_array_equal(Y, Y2)


def test_polar_factor_matches_svd():
    A = np.random.default_rng(2).standard_normal((5, 3))
    Q, degenerate = polar_factor(A)
    U, _, Vt = np.linalg.svd(A, full_matrices=False)
    assert not degenerate
    np.testing.assert_allclose(Q, U @ Vt, atol=1e-14)


# --- random points -----------------------------------------------------------


def test_random_point_deterministic_and_feasible():
    spec = ManifoldSpec.stiefel(6, 3)
    np.testing.assert_array_equal(random_point(spec, 5), random_point(spec, 5))
    assert orthonormality_residual(random_point(spec, 5)) <= 1e-12


def test_random_sphere_points_centered():
    X = np.hstack([random_point(ManifoldSpec.sphere(5), seed) for seed in range(1, 101)])
    mean = X.mean(axis=1)
    sd = X.std(axis=1, ddof=1)
    assert np.all(np.abs(mean) <= 3 / np.sqrt(100) * sd)


# --- feasibility policy ------------------------------------------------------


def test_check_point_repairs_small_drift_and_rejects_large():
    spec = ManifoldSpec.stiefel(4, 2)
    X = random_point(spec, 0)
    assert check_point(spec, X) is not None
    drift = X * (1 + 1e-6)
    repaired = check_point(spec, drift)
    assert orthonormality_residual(repaired) < 1e-12
    with pytest.raises(InfeasiblePointError):
        check_point(spec, X * 1.1)
    with pytest.raises(DimensionError):
        check_point(spec, np.eye(4))


# --- properties --------------------------------------------------------------

specs = st.sampled_from(
    [
        ManifoldSpec.sphere(3),
        ManifoldSpec.sphere(6),
        ManifoldSpec.stiefel(5, 2),
        ManifoldSpec.stiefel(4, 4),
        ManifoldSpec.orthogonal(3),
        ManifoldSpec.stiefel(6, 3, Retraction.QR),
    ]
)


@settings(max_examples=60, deadline=None)
@given(spec=specs, seed=st.integers(0, 2**31), scale=st.floats(1e-3, 1e3))
def test_projection_properties(spec, seed, scale):
    X = random_point(spec, seed)
    rng = np.random.default_rng([seed, 1])
    D = scale * rng.standard_normal(X.shape)
    D2 = rng.standard_normal(X.shape)
    P = project_tangent(X, D)
    assert tangency_residual(X, P) <= 1e-10 * np.linalg.norm(D)
    assert np.linalg.norm(P) <= np.linalg.norm(D) * (1 + 1e-12)
    np.testing.assert_allclose(project_tangent(X, P), P, atol=1e-12 * np.linalg.norm(D))
    np.testing.assert_allclose(
        project_tangent(X, 2 * D + D2), 2 * P + project_tangent(X, D2), atol=1e-11 * (1 + np.linalg.norm(D))
    )


@settings(max_examples=60, deadline=None)
@given(spec=specs, seed=st.integers(0, 2**31), size=st.floats(0, 1))
def test_retraction_stays_feasible(spec, seed, size):
    X = random_point(spec, seed)
    D = project_tangent(X, np.random.default_rng([seed, 1]).standard_normal(X.shape))
    D *= size / np.linalg.norm(D)
    assert orthonormality_residual(retract(X, D, spec.retraction)) <= 1e-10


@settings(max_examples=20, deadline=None)
@given(spec=specs, seed=st.integers(0, 2**31))
def test_retraction_first_order(spec, seed):
    X = random_point(spec, seed)
    D = project_tangent(X, np.random.default_rng([seed, 1]).standard_normal(X.shape))
    D /= np.linalg.norm(D)
    ratios = [np.linalg.norm(retract(X, t * D, spec.retraction) - X - t * D) / t**2 for t in (1e-2, 1e-3, 1e-4)]
    assert max(ratios) <= 2.0


def test_invalid_retraction_name():
    with pytest.raises(ValueError):
        Retraction("cayley")
    with pytest.raises(DimensionError):
        ManifoldSpec(ManifoldKind.SPHERE, 0, 1)
