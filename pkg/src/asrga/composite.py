"""Composite objectives ``g(X) + w * sum_i [phi(h_i(X))]^p`` on a manifold.

A problem is described by a smooth part ``g`` (value and Euclidean gradient),
a vectorized penalty map ``X -> (h_1(X), ..., h_m(X))`` with its
vector-Jacobian product, a smoothing kernel, the exponent ``p`` and a scalar
penalty weight ``w``. The smoothed surrogate replaces ``phi`` by ``phi_mu``:

    f_mu(X)      = g(X) + w * sum_i [phi_mu(h_i(X))]^p
    grad f_mu(X) = grad g(X) + w * p * sum_i [phi_mu(h_i)]^(p-1) phi_mu'(h_i) grad h_i(X)

Four application instances are provided: sparse PCA, dual principal
component pursuit, orthogonal sparse dictionary learning and the exact
penalty model for nonnegative orthogonality constraints.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from .errors import DimensionError, NumericError, ParameterError, UnavailableError
from .manifolds import ManifoldSpec, as_matrix, project_tangent
from .smoothing import SMOOTHED_ABS, SMOOTHED_PLUS, SmoothingKernel


@dataclass(frozen=True)
class SmoothPart:
    value: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class PenaltyMap:
    """The inner functions ``h_i`` evaluated all at once.

    ``values(X)`` returns an array holding the ``m`` values ``h_i(X)`` (any
    shape); ``pullback(X, W)`` returns ``sum_i W_i grad h_i(X)`` as an ambient
    matrix, for ``W`` shaped like ``values(X)``.
    """

    values: Callable[[np.ndarray], np.ndarray]
    pullback: Callable[[np.ndarray, np.ndarray], np.ndarray]
    m: int


@dataclass(frozen=True)
class ProblemConstants:
    """Lipschitz constants of grad g / grad h_i and bounds on their norms over M."""

    L_g: float
    L_h: float
    M_g: float
    M_h: float


class TheoryConstants(NamedTuple):
    L1: float
    L2: float
    L_mu: float
    M_mu: float


@dataclass(frozen=True)
class CompositeProblem:
    manifold: ManifoldSpec
    p: float
    kernel: SmoothingKernel = SMOOTHED_ABS
    smooth: Optional[SmoothPart] = None
    penalty: Optional[PenaltyMap] = None
    weight: float = 1.0
    constants: Optional[ProblemConstants] = None
    name: str = "custom"

    def __post_init__(self):
        if not (0 < self.p <= 1):
            raise ParameterError(f"exponent p must lie in (0, 1], got {self.p!r}")
        if not (np.isfinite(self.weight) and self.weight > 0):
            raise ParameterError(f"penalty weight must be positive, got {self.weight!r}")

    @property
    def m(self):
        return 0 if self.penalty is None else self.penalty.m

    @property
    def penalty_mass(self):
        """``w * m``, the quantity that plays the role of ``m`` in the bounds."""
        return self.weight * self.m


def _term_powers(v, p):
    # v >= sigma*mu > 0, so log is safe; exp(p log v) and v^(p-1) = v^p / v
    # avoid the overflow-prone direct power at small p.
    if p == 1.0:
        return v, np.ones_like(v)
    with np.errstate(invalid="ignore", over="ignore"):
        vp = np.exp(p * np.log(v))
        return vp, vp / v


def _locate_nonfinite(arr, what):
    bad = np.flatnonzero(~np.isfinite(np.ravel(arr)))
    idx = int(bad[0]) if bad.size else -1
    raise NumericError(f"non-finite {what} at penalty term index {idx}")


def evaluate(prob, X, mu, want_value=True, want_grad=True):
    """Smoothed value and Euclidean gradient in one pass.

    Returns ``(value, egrad)``; entries not requested are ``None``.
    """
    X = as_matrix(X)
    if X.shape != prob.manifold.shape:
        raise DimensionError(f"point has shape {X.shape}, problem expects {prob.manifold.shape}")
    val = None
    grad = None
    if prob.smooth is not None:
        if want_value:
            val = float(prob.smooth.value(X))
        if want_grad:
            grad = prob.smooth.grad(X)
    else:
        if want_value:
            val = 0.0
        if want_grad:
            grad = np.zeros_like(X)
    if prob.penalty is not None and prob.m > 0:
        h = prob.penalty.values(X)
        v, d = prob.kernel.value_and_derivative(h, mu)
        vp, vpm1 = _term_powers(v, prob.p)
        if want_value:
            pen = float(np.sum(vp))
            if not np.isfinite(pen):
                _locate_nonfinite(vp, "penalty value")
            val += prob.weight * pen
        if want_grad:
            W = (prob.weight * prob.p) * vpm1 * d
            grad = grad + prob.penalty.pullback(X, W)
            if not np.all(np.isfinite(grad)):
                _locate_nonfinite(W, "penalty gradient weight")
    if want_value and not np.isfinite(val):
        raise NumericError("non-finite smooth part value")
    return val, grad


def smoothed_value(prob, X, mu):
    return evaluate(prob, X, mu, want_grad=False)[0]


def smoothed_euclidean_gradient(prob, X, mu):
    return evaluate(prob, X, mu, want_value=False)[1]


def smoothed_riemannian_gradient(prob, X, mu):
    return project_tangent(X, smoothed_euclidean_gradient(prob, X, mu))


def value_and_riemannian_gradient(prob, X, mu):
    f, g = evaluate(prob, X, mu)
    return f, project_tangent(X, g)


def true_value(prob, X):
    """The unsmoothed objective ``g(X) + w * sum_i [phi(h_i(X))]^p``."""
    X = as_matrix(X)
    val = 0.0 if prob.smooth is None else float(prob.smooth.value(X))
    if prob.penalty is not None and prob.m > 0:
        base = prob.kernel.base(prob.penalty.values(X))
        val += prob.weight * float(np.sum(base if prob.p == 1.0 else base**prob.p))
    return val


def theory_constants(prob, mu):
    """Lipschitz constant ``L_mu`` of the smoothed gradient and the bound ``M_mu``.

    ``L1 = p m sigma^(p-1) M_phi``,
    ``L2 = p m sigma^(p-2) M_h^2 (sigma L_phi + (1-p) M_phi^2)``,
    ``L_mu = L_g + L1 L_h mu^(p-1) + L2 mu^(p-2)``,
    ``M_mu = M_g + L1 M_h mu^(p-1)``, with ``m`` replaced by ``w * m``.
    """
    if prob.constants is None:
        raise UnavailableError("problem has no (L_g, L_h, M_g, M_h) constants")
    if not mu > 0:
        raise ParameterError(f"mu must be positive, got {mu!r}")
    c = prob.constants
    p = prob.p
    sigma, _, m_phi, l_phi = prob.kernel.certified_constants()
    mass = prob.penalty_mass
    L1 = p * mass * sigma ** (p - 1) * m_phi
    L2 = p * mass * sigma ** (p - 2) * c.M_h**2 * (sigma * l_phi + (1 - p) * m_phi**2)
    L_mu = c.L_g + L1 * c.L_h * mu ** (p - 1) + L2 * mu ** (p - 2)
    M_mu = c.M_g + L1 * c.M_h * mu ** (p - 1)
    return TheoryConstants(L1, L2, L_mu, M_mu)


def mu_lipschitz_bound(prob, mu1, mu2):
    """Upper bound on ``|f_mu1(X) - f_mu2(X)|`` valid for ``0 < mu2 <= mu1 <= 1``."""
    if not (0 < mu2 <= mu1):
        raise ParameterError(f"need 0 < mu2 <= mu1, got mu1={mu1!r}, mu2={mu2!r}")
    p = prob.p
    sigma, kappa, _, _ = prob.kernel.certified_constants()
    return prob.penalty_mass * kappa * sigma ** (p - 1) * (mu1 / mu2) ** (1 - p) * (mu1**p - mu2**p)


# ---------------------------------------------------------------------------
# application instances


class InstanceKind(str, enum.Enum):
    SPCA = "spca"
    DPCP = "dpcp"
    SDL = "sdl"
    NONNEG_ORTH = "nonneg_orth"
    CUSTOM = "custom"


@dataclass
class ProblemInstance:
    """Data behind an application problem.

    ``data`` is ``A`` (SPCA, ``n x samples``), ``E`` (DPCP, one data point per
    row), ``Y`` (SDL, ``n x samples``) or the symmetric ``C`` of
    ``g(X) = -tr(X^T C X)/2`` (nonnegative orthogonality).
    """

    kind: InstanceKind
    data: np.ndarray
    s: int = 1
    lam: Optional[float] = None
    alpha: Optional[float] = None
    ground_truth: Optional[np.ndarray] = None
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        self.kind = InstanceKind(self.kind)
        self.data = np.asarray(self.data, dtype=float)
        if self.data.ndim != 2:
            raise DimensionError(f"instance data must be a matrix, got ndim={self.data.ndim}")


def _quadratic_part(C):
    def value(X):
        return -0.5 * float(np.sum(X * (C @ X)))

    def grad(X):
        return -(C @ X)

    return SmoothPart(value, grad)


def _top_eigen_bounds(C, s):
    """``(||C||_2, max_{X^T X = I_s} ||C X||_F)`` for symmetric ``C``."""
    lam = np.linalg.eigvalsh(C)
    sq = np.sort(lam**2)[::-1]
    return float(np.sqrt(sq[0])), float(np.sqrt(np.sum(sq[:s])))


def spca_problem(A, s, lam, p=1.0):
    """``-tr(X^T A A^T X)/2 + lam * sum_ij |X_ij|^p`` on the Stiefel manifold."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    if lam <= 0:
        raise ParameterError(f"lam must be positive, got {lam!r}")
    C = A @ A.T
    L_g, M_g = _top_eigen_bounds(C, s)
    penalty = PenaltyMap(values=lambda X: X, pullback=lambda X, W: W, m=n * s)
    return CompositeProblem(
        manifold=ManifoldSpec.stiefel(n, s),
        p=p,
        kernel=SMOOTHED_ABS,
        smooth=_quadratic_part(C),
        penalty=penalty,
        weight=float(lam),
        constants=ProblemConstants(L_g=L_g, L_h=0.0, M_g=M_g, M_h=1.0),
        name="spca",
    )


def dpcp_problem(E, p):
    """``sum_i |E_i x|^p`` on the unit sphere; rows of ``E`` are data points."""
    E = np.asarray(E, dtype=float)
    m, n = E.shape
    # the pullback must return the ambient n x 1 shape
    penalty = PenaltyMap(values=lambda X: E @ X, pullback=lambda X, W: E.T @ W, m=m)
    M_h = float(np.max(np.linalg.norm(E, axis=1))) if m else 0.0
    return CompositeProblem(
        manifold=ManifoldSpec.sphere(n),
        p=p,
        kernel=SMOOTHED_ABS,
        penalty=penalty,
        constants=ProblemConstants(L_g=0.0, L_h=0.0, M_g=0.0, M_h=M_h),
        name="dpcp",
    )


def sdl_problem(Y, p):
    """``(1/m) sum_i ||Y_i^T X||_p^p`` on the orthogonal group."""
    Y = np.asarray(Y, dtype=float)
    n, samples = Y.shape
    penalty = PenaltyMap(values=lambda X: Y.T @ X, pullback=lambda X, W: Y @ W, m=samples * n)
    M_h = float(np.max(np.linalg.norm(Y, axis=0))) if samples else 0.0
    return CompositeProblem(
        manifold=ManifoldSpec.orthogonal(n),
        p=p,
        kernel=SMOOTHED_ABS,
        penalty=penalty,
        weight=1.0 / samples,
        constants=ProblemConstants(L_g=0.0, L_h=0.0, M_g=0.0, M_h=M_h),
        name="sdl",
    )


def nonneg_orth_problem(C, s, alpha, p=0.5):
    """Exact penalty ``g(X) + alpha * sum_ij [max(-X_ij, 0)]^p`` on the Stiefel manifold.

    ``g(X) = -tr(X^T C X)/2``. The penalty is exact for ``p <= 1/2`` and
    ``alpha > 5 Q s^(3/4)`` with ``Q = max ||grad g||_F``; see
    :func:`exact_penalty_threshold`.
    """
    C = np.asarray(C, dtype=float)
    n = C.shape[0]
    if C.shape != (n, n):
        raise DimensionError(f"C must be square, got {C.shape}")
    if alpha <= 0:
        raise ParameterError(f"alpha must be positive, got {alpha!r}")
    if p > 0.5:
        warnings.warn(
            f"exact penalty is only guaranteed for p <= 1/2 (got p={p})", UserWarning, stacklevel=2
        )
    C = (C + C.T) / 2
    L_g, M_g = _top_eigen_bounds(C, s)
    penalty = PenaltyMap(values=lambda X: -X, pullback=lambda X, W: -W, m=n * s)
    return CompositeProblem(
        manifold=ManifoldSpec.stiefel(n, s),
        p=p,
        kernel=SMOOTHED_PLUS,
        smooth=_quadratic_part(C),
        penalty=penalty,
        weight=float(alpha),
        constants=ProblemConstants(L_g=L_g, L_h=0.0, M_g=M_g, M_h=1.0),
        name="nonneg_orth",
    )


def exact_penalty_threshold(C, s):
    """``5 Q s^(3/4)`` with ``Q = max_{X^T X = I_s} ||C X||_F``."""
    C = np.asarray(C, dtype=float)
    _, Q = _top_eigen_bounds((C + C.T) / 2, s)
    return 5.0 * Q * s**0.75


def build_problem(instance, p):
    """CompositeProblem for a :class:`ProblemInstance`."""
    kind = instance.kind
    D = instance.data
    if kind is InstanceKind.SPCA:
        return spca_problem(D, instance.s, 0.5 if instance.lam is None else instance.lam, p)
    if kind is InstanceKind.DPCP:
        return dpcp_problem(D, p)
    if kind is InstanceKind.SDL:
        return sdl_problem(D, p)
    if kind is InstanceKind.NONNEG_ORTH:
        alpha = instance.alpha
        if alpha is None:
            alpha = 1.01 * exact_penalty_threshold(D, instance.s)
        return nonneg_orth_problem(D, instance.s, alpha, p)
    raise ParameterError(f"cannot build a problem for instance kind {kind.value!r}")


DATA_STREAM = 0xDA7A


def data_rng(seed):
    """Generator for instance data, independent of ``random_point(spec, seed)``."""
    return np.random.default_rng([int(seed), DATA_STREAM])


def make_instance(kind, dims, hyperparams=None, seed=0):
    """Random Gaussian instance of an application problem.

    ``dims`` holds ``n`` plus ``s`` (SPCA, nonnegative orthogonality) and
    ``m`` (number of samples / data points). ``hyperparams`` may give ``p``,
    ``lam`` and ``alpha``. Returns ``(problem, instance)``.
    """
    kind = InstanceKind(kind)
    hp = dict(hyperparams or {})
    rng = data_rng(seed)
    n = int(dims["n"])
    s = int(dims.get("s", 1))
    m = int(dims.get("m", 2 * n))
    if n < 1 or m < 1 or not (1 <= s <= n):
        raise DimensionError(f"inconsistent dimensions n={n}, s={s}, m={m}")
    if kind is InstanceKind.SPCA:
        inst = ProblemInstance(kind, rng.standard_normal((n, m)) / np.sqrt(m), s=s, lam=hp.get("lam", 0.5))
        p = hp.get("p", 1.0)
    elif kind is InstanceKind.DPCP:
        inst = ProblemInstance(kind, rng.standard_normal((m, n)), s=1)
        p = hp.get("p", 0.5)
    elif kind is InstanceKind.SDL:
        inst = ProblemInstance(kind, rng.standard_normal((n, m)), s=n)
        p = hp.get("p", 0.5)
    elif kind is InstanceKind.NONNEG_ORTH:
        B = rng.standard_normal((n, m)) / np.sqrt(m)
        C = B @ B.T
        inst = ProblemInstance(kind, C, s=s)
        inst.alpha = hp.get("alpha", 1.01 * exact_penalty_threshold(C, s))
        inst.extras["alpha_threshold"] = exact_penalty_threshold(C, s)
        p = hp.get("p", 0.5)
    else:
        raise ParameterError("custom instances have no generator")
    return build_problem(inst, p), inst
