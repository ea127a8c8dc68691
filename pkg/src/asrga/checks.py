"""Executable property suites: smoothing, gradients, manifolds and rate.

Every check returns :class:`PropertyResult` records holding the measured
quantity, the bound it is compared against and the verdict. The suites back
both ``asrga check <suite>`` and the test-suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources

import numpy as np

from . import composite
from .bench import read_trace, rate_report
from .composite import InstanceKind, make_instance
from .errors import ParameterError
from .manifolds import (
    ManifoldSpec,
    Retraction,
    orthonormality_residual,
    project_tangent,
    random_point,
    retract,
    tangency_residual,
)
from .smoothing import KERNELS
from .solvers import IterationTrace

BUNDLED_TRACE = "sdl_rate_trace.csv"
BUNDLED_TRACE_P = 0.5


@dataclass(frozen=True)
class PropertyResult:
    """``measured <relation> bound``; ``relation`` is ``"<="`` or ``">"``."""

    name: str
    measured: float
    bound: float
    passed: bool
    relation: str = "<="

    @property
    def slack(self):
        return self.bound - self.measured if self.relation == "<=" else self.measured - self.bound

    def line(self):
        verdict = "PASS" if self.passed else "FAIL"
        return (
            f"{verdict}  {self.name}: measured {self.measured:.3e} {self.relation} "
            f"{self.bound:.3e} (slack {self.slack:.3e})"
        )


def _at_most(name, measured, bound):
    measured = float(measured)
    return PropertyResult(name, measured, float(bound), bool(measured <= bound))


# ---------------------------------------------------------------------------
# smoothing


def smoothing_grid(size=100):
    """``size x size`` grid: ``t`` across the caps and tails, ``mu`` in ``[1e-6, 1]``."""
    mu = np.logspace(-6, 0, size)
    t = np.concatenate([-np.logspace(-7, 1, size // 2)[::-1], np.logspace(-7, 1, size - size // 2)])
    T, M = np.meshgrid(t, mu, indexing="ij")
    # add the branch points |t| = mu themselves
    T[0, :], T[-1, :] = -mu, mu
    return T.ravel(), M.ravel()


def check_smoothing(size=100, seed=0):
    """Lower bound, mu-Lipschitz, derivative bound and derivative-Lipschitz
    properties on a ``size^2``-point grid, plus the vanishing-smoothing limit
    along ``t0 + 2^-j``, ``mu = 2^-j``."""
    rng = np.random.default_rng(seed)
    t, mu = smoothing_grid(size)
    mu2 = mu * rng.uniform(0.0, 1.0, mu.size) + 1e-12
    t2 = t + rng.normal(size=t.size) * rng.choice([1e-3, 1e-1, 1.0], t.size) * mu
    out = []
    for kind, ker in KERNELS.items():
        sigma, kappa, m_phi, l_phi = ker.certified_constants()
        v, d = ker.value_and_derivative(t, mu)
        v2 = ker.value(t, mu2)
        d2 = ker.derivative(t2, mu)
        name = kind.value
        out.append(_at_most(f"{name} lower bound value >= sigma*mu", np.max(sigma * mu - v), 1e-14))
        out.append(
            _at_most(
                f"{name} mu-Lipschitz |dphi| <= kappa*|dmu|",
                np.max(np.abs(v - v2) - kappa * np.abs(mu - mu2)),
                1e-12,
            )
        )
        out.append(_at_most(f"{name} derivative bound |phi'| <= M_phi", np.max(np.abs(d)) - m_phi, 1e-14))
        out.append(
            _at_most(
                f"{name} derivative Lipschitz |dphi'| <= L_phi/mu*|dt|",
                np.max(np.abs(d - d2) - l_phi / mu * np.abs(t - t2)),
                1e-12,
            )
        )
        j = np.arange(1, 41)
        gaps = []
        for t0 in (-1.0, 0.0, 0.3):
            seq = ker.value(t0 + 2.0**-j, 2.0**-j)
            gaps.append(abs(seq[-1] - float(ker.base(t0))))
        out.append(_at_most(f"{name} limit phi_mu(t0 + mu) -> phi(t0)", max(gaps), 1e-10))
    return out


# ---------------------------------------------------------------------------
# gradients

SMALL_DIMS = {
    InstanceKind.SPCA: {"n": 6, "s": 2, "m": 12},
    InstanceKind.DPCP: {"n": 4, "m": 30},
    InstanceKind.SDL: {"n": 4, "m": 40},
    InstanceKind.NONNEG_ORTH: {"n": 5, "s": 2, "m": 10},
}
SMALL_P = {
    InstanceKind.SPCA: 0.7,
    InstanceKind.DPCP: 0.5,
    InstanceKind.SDL: 0.5,
    InstanceKind.NONNEG_ORTH: 0.5,
}


def small_problems(seed=0):
    """One small random instance per shipped problem kind."""
    out = {}
    for i, (kind, dims) in enumerate(SMALL_DIMS.items()):
        prob, _ = make_instance(kind, dims, {"p": SMALL_P[kind]}, seed=seed + i)
        out[kind] = prob
    return out


def _near_branch(prob, X, mu, band):
    h = np.asarray(prob.penalty.values(X))
    return bool(np.any(np.abs(np.abs(h) - mu) < band))


def finite_difference_gradient(prob, X, mu, h=1e-6):
    """Central differences of the smoothed value, one ambient coordinate at a time."""
    G = np.zeros_like(X)
    for idx in np.ndindex(X.shape):
        E = np.zeros_like(X)
        E[idx] = h
        fp = composite.smoothed_value(prob, X + E, mu)
        fm = composite.smoothed_value(prob, X - E, mu)
        G[idx] = (fp - fm) / (2 * h)
    return G


def gradient_errors(prob, pairs=20, seed=0, corrupt=None, band=1e-3):
    """Relative analytic-vs-finite-difference errors at random ``(X, mu)``.

    ``mu`` is log-uniform in ``[1e-2, 1]``. Points with a penalty argument
    within ``band`` of a kernel branch point are resampled, the kernel being
    only C^1 there. ``corrupt`` maps the analytic gradient before comparison
    (negative-control hook).
    """
    rng = np.random.default_rng(seed)
    errs = []
    while len(errs) < pairs:
        X = random_point(prob.manifold, int(rng.integers(2**31)))
        mu = float(10 ** rng.uniform(-2, 0))
        if prob.m and _near_branch(prob, X, mu, band):
            continue
        G = composite.smoothed_euclidean_gradient(prob, X, mu)
        if corrupt is not None:
            G = corrupt(G)
        F = finite_difference_gradient(prob, X, mu)
        errs.append(float(np.linalg.norm(G - F) / max(np.linalg.norm(F), 1e-12)))
    return np.array(errs)


def lipschitz_ratios(prob, mu, pairs=1000, seed=0, radius=1e-2):
    """``||grad f_mu(X) - grad f_mu(Y)|| / ||X - Y||`` over random nearby pairs on M."""
    rng = np.random.default_rng(seed)
    out = np.empty(pairs)
    for i in range(pairs):
        X = random_point(prob.manifold, int(rng.integers(2**31)))
        D = project_tangent(X, rng.standard_normal(X.shape))
        D *= radius * rng.uniform(0.01, 1.0) / np.linalg.norm(D)
        Y = retract(X, D)
        gx = composite.smoothed_euclidean_gradient(prob, X, mu)
        gy = composite.smoothed_euclidean_gradient(prob, Y, mu)
        out[i] = np.linalg.norm(gx - gy) / np.linalg.norm(X - Y)
    return out


def mu_lipschitz_excess(prob, triples=1000, seed=0):
    """``max |f_mu1 - f_mu2| - bound(mu1, mu2)`` over random ``X`` and ``mu2 <= mu1``."""
    rng = np.random.default_rng(seed)
    worst = -math.inf
    for _ in range(triples):
        X = random_point(prob.manifold, int(rng.integers(2**31)))
        a, b = 10 ** rng.uniform(-6, 0, 2)
        mu1, mu2 = max(a, b), min(a, b)
        gap = abs(composite.smoothed_value(prob, X, mu1) - composite.smoothed_value(prob, X, mu2))
        worst = max(worst, gap - composite.mu_lipschitz_bound(prob, mu1, mu2))
    return worst


def check_gradients(pairs=20, seed=0, corrupt=None, lipschitz_pairs=200, triples=200):
    out = []
    for kind, prob in small_problems(seed).items():
        errs = gradient_errors(prob, pairs, seed, corrupt)
        out.append(_at_most(f"{kind.value} gradient vs finite differences (rel)", errs.max(), 1e-5))
        rng = np.random.default_rng(seed)
        worst = 0.0
        for _ in range(pairs):
            X = random_point(prob.manifold, int(rng.integers(2**31)))
            G = composite.smoothed_riemannian_gradient(prob, X, float(10 ** rng.uniform(-2, 0)))
            worst = max(worst, tangency_residual(X, G) / max(np.linalg.norm(G), 1e-300))
        out.append(_at_most(f"{kind.value} Riemannian gradient tangency (rel)", worst, 1e-10))
        out.append(
            _at_most(
                f"{kind.value} |f_mu1 - f_mu2| within mu-Lipschitz bound",
                mu_lipschitz_excess(prob, triples, seed),
                1e-10,
            )
        )
    spca = small_problems(seed)[InstanceKind.SPCA]
    for mu in (1.0, 0.1, 0.01):
        L = composite.theory_constants(spca, mu).L_mu
        out.append(
            _at_most(
                f"spca gradient Lipschitz ratio <= L_mu at mu={mu:g}",
                lipschitz_ratios(spca, mu, lipschitz_pairs, seed).max(),
                L,
            )
        )
    return out


# ---------------------------------------------------------------------------
# manifolds

CHECK_MANIFOLDS = (
    ManifoldSpec.sphere(5),
    ManifoldSpec.stiefel(6, 3),
    ManifoldSpec.orthogonal(4),
    ManifoldSpec.stiefel(6, 3, Retraction.QR),
)


def taylor_ratios(spec, X, D, ts=(1e-2, 1e-3, 1e-4)):
    """``||R_X(tD) - X - tD|| / t^2`` for each ``t``."""
    return np.array([np.linalg.norm(retract(X, t * D, spec.retraction) - X - t * D) / t**2 for t in ts])


def check_manifolds(pairs=20, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for spec in CHECK_MANIFOLDS:
        label = f"{spec.kind.value}({spec.n},{spec.s},{spec.retraction.value})"
        tang = contraction = feas = zero = taylor = 0.0
        for _ in range(pairs):
            X = random_point(spec, int(rng.integers(2**31)))
            A = rng.standard_normal(X.shape)
            P = project_tangent(X, A)
            tang = max(tang, tangency_residual(X, P) / np.linalg.norm(A))
            contraction = max(contraction, np.linalg.norm(P) - np.linalg.norm(A))
            D = P / np.linalg.norm(P) * rng.uniform(0, 1)
            feas = max(feas, orthonormality_residual(retract(X, D, spec.retraction)))
            zero = max(zero, float(np.max(np.abs(retract(X, np.zeros_like(X), spec.retraction) - X))))
            U = P / np.linalg.norm(P)
            taylor = max(taylor, taylor_ratios(spec, X, U).max())
        out.append(_at_most(f"{label} tangency of projection (rel)", tang, 1e-10))
        out.append(_at_most(f"{label} projection is a contraction", contraction, 1e-12))
        out.append(_at_most(f"{label} retraction feasibility", feas, 1e-10))
        out.append(_at_most(f"{label} R_X(0) = X", zero, 0.0))
        # second-order remainder of a retraction with unit direction
        out.append(_at_most(f"{label} Taylor remainder / t^2", taylor, 2.0))
    return out


# ---------------------------------------------------------------------------
# rate


def bundled_trace():
    ref = resources.files("asrga") / "data" / BUNDLED_TRACE
    with resources.as_file(ref) as path:
        return read_trace(path)


def synthetic_trace(grad_norms):
    return [
        IterationTrace(k, 1.0, 1.0, 1.0, float(g), 0.0, 0.0, None, 0.0)
        for k, g in enumerate(grad_norms, start=1)
    ]


def check_rate(trace=None, p=BUNDLED_TRACE_P, iters=1000):
    out = []
    bundled = trace is None
    rep = rate_report(bundled_trace() if bundled else trace, p)
    out.append(
        PropertyResult(
            f"{'bundled SDL trace' if bundled else 'trace'} tail/head rate ratio",
            rep.ratio, 1.5, not rep.violated,
        )
    )
    k = np.arange(1, iters + 1)
    neg = rate_report(synthetic_trace(np.ones(iters)), p)
    out.append(PropertyResult("constant-gradient control is flagged", neg.ratio, 1.5, neg.violated, ">"))
    pos = rate_report(synthetic_trace(k ** (-1.0 / (4 - p))), p)
    out.append(_at_most("c/k^(1/(4-p)) control |ratio - 1|", abs(pos.ratio - 1.0), 1e-12))
    return out


SUITES = {
    "smoothing": check_smoothing,
    "gradients": check_gradients,
    "manifolds": check_manifolds,
    "rate": check_rate,
}


def run_suite(name, **kwargs):
    try:
        fn = SUITES[name]
    except KeyError:
        raise ParameterError(f"unknown suite {name!r}; choose from {sorted(SUITES)}") from None
    return fn(**kwargs)
