"""Compact embedded matrix manifolds: sphere, Stiefel manifold, orthogonal group.

All three are handled as Stiefel manifolds ``{X in R^{n x s} : X^T X = I_s}``
(sphere: ``s = 1``, orthogonal group: ``s = n``), so a single tangent
projection and a single pair of retractions cover every case. Points and
tangent vectors are plain 2-D ``numpy`` arrays; functions never modify their
inputs.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InfeasiblePointError, NumericError

FEASIBILITY_TOL = 1e-8
REPAIR_TOL = 1e-4


class ManifoldKind(str, enum.Enum):
    SPHERE = "sphere"
    STIEFEL = "stiefel"
    ORTHOGONAL = "orthogonal"


class Retraction(str, enum.Enum):
    POLAR = "polar"
    QR = "qr"


@dataclass(frozen=True)
class ManifoldSpec:
    """Shape and retraction choice of a Stiefel-type manifold."""

    kind: ManifoldKind
    n: int
    s: int
    retraction: Retraction = Retraction.POLAR

    def __post_init__(self):
        object.__setattr__(self, "kind", ManifoldKind(self.kind))
        object.__setattr__(self, "retraction", Retraction(self.retraction))
        if not (1 <= self.s <= self.n):
            raise DimensionError(f"need 1 <= s <= n, got n={self.n}, s={self.s}")
        if self.kind is ManifoldKind.SPHERE and self.s != 1:
            raise DimensionError(f"sphere requires s = 1, got s={self.s}")
        if self.kind is ManifoldKind.ORTHOGONAL and self.s != self.n:
            raise DimensionError(f"orthogonal group requires s = n, got n={self.n}, s={self.s}")

    @classmethod
    def sphere(cls, n, retraction=Retraction.POLAR):
        return cls(ManifoldKind.SPHERE, n, 1, retraction)

    @classmethod
    def stiefel(cls, n, s, retraction=Retraction.POLAR):
        return cls(ManifoldKind.STIEFEL, n, s, retraction)

    @classmethod
    def orthogonal(cls, n, retraction=Retraction.POLAR):
        return cls(ManifoldKind.ORTHOGONAL, n, n, retraction)

    @property
    def shape(self):
        return (self.n, self.s)

    def project(self, X, D):
        return project_tangent(X, D)

    def retract(self, X, D):
        return retract(X, D, self.retraction)

    def random_point(self, seed):
        return random_point(self, seed)

    def check_point(self, X):
        return check_point(self, X)


def as_matrix(X):
    """View a vector as an ``n x 1`` matrix; matrices pass through."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        return X[:, None]
    if X.ndim != 2:
        raise DimensionError(f"expected a vector or a matrix, got ndim={X.ndim}")
    return X


def orthonormality_residual(X):
    X = as_matrix(X)
    return float(np.linalg.norm(X.T @ X - np.eye(X.shape[1])))


def tangency_residual(X, D):
    """``||X^T D + D^T X||_F``, zero exactly when ``D`` is tangent at ``X``."""
    X, D = as_matrix(X), as_matrix(D)
    XtD = X.T @ D
    return float(np.linalg.norm(XtD + XtD.T))


def project_tangent(X, D):
    """Orthogonal projection of an ambient matrix onto the tangent space at X.

    ``D - X (X^T D + D^T X) / 2``
    """
    X, D = as_matrix(X), as_matrix(D)
    if X.shape != D.shape:
        raise DimensionError(f"shape mismatch: point {X.shape}, direction {D.shape}")
    XtD = X.T @ D
    return D - X @ ((XtD + XtD.T) / 2)


def polar_factor(A):
    """Orthonormal polar factor ``U V^T`` of ``A``.

    Returns ``(Q, degenerate)``. When ``A`` has a (numerically) zero singular
    value the polar factor is not unique; the sign-fixed QR factor is
    returned instead and ``degenerate`` is True.
    """
    A = as_matrix(A)
    if A.shape[1] == 1:
        nrm = np.linalg.norm(A)
        if nrm == 0.0:
            return qr_factor(A), True
        return A / nrm, False
    U, sv, Vt = np.linalg.svd(A, full_matrices=False)
    if sv[-1] <= sv[0] * 1e-12:
        return qr_factor(A), True
    return U @ Vt, False


def qr_factor(A):
    """Q factor of a thin QR decomposition with nonnegative diagonal of R."""
    A = as_matrix(A)
    Q, R = np.linalg.qr(A)
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs


def retract_info(X, D, method=Retraction.POLAR):
    """Retraction plus a flag telling whether the QR fallback was used."""
    X, D = as_matrix(X), as_matrix(D)
    if X.shape != D.shape:
        raise DimensionError(f"shape mismatch: point {X.shape}, direction {D.shape}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(D))):
        raise NumericError("non-finite entries passed to retraction")
    if not D.any():
        return X.copy(), False
    if Retraction(method) is Retraction.QR:
        return qr_factor(X + D), False
    return polar_factor(X + D)


def retract(X, D, method=Retraction.POLAR):
    """Map a tangent vector ``D`` at ``X`` back onto the manifold.

    Polar retraction ``R_X(D) = U V^T`` where ``X + D = U S V^T``, or the
    QR retraction. ``retract(X, 0)`` returns ``X`` unchanged.
    """
    return retract_info(X, D, method)[0]


def random_point(spec, seed):
    """Orthonormalized standard Gaussian matrix, deterministic per seed."""
    rng = np.random.default_rng(seed)
    G = rng.standard_normal(spec.shape)
    Q, _ = polar_factor(G)
    return Q


def check_point(spec, X, tol=FEASIBILITY_TOL, repair_tol=REPAIR_TOL):
    """Validate a point, re-orthonormalizing small drift.

    Residuals up to ``tol`` are accepted as is, residuals in
    ``(tol, repair_tol]`` are corrected by polar projection, anything larger
    raises :class:`InfeasiblePointError`.
    """
    X = as_matrix(X)
    if X.shape != spec.shape:
        raise DimensionError(f"point has shape {X.shape}, manifold expects {spec.shape}")
    if not np.all(np.isfinite(X)):
        raise NumericError("point has non-finite entries")
    res = orthonormality_residual(X)
    if res <= tol:
        return X
    if res <= repair_tol:
        return polar_factor(X)[0]
    raise InfeasiblePointError(f"orthonormality residual {res:.3g} exceeds {repair_tol:g}")
