"""Synthetic benchmark data, error metrics, trace files and run reports."""

from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .composite import InstanceKind, ProblemInstance, data_rng, true_value
from .errors import DimensionError, ParameterError, UnavailableError
from .manifolds import as_matrix, polar_factor
from .solvers import IterationTrace

TRACE_HEADER = "k,mu,eta,step,grad_norm,f_smooth,f_true,metric,elapsed_s"
RATE_THRESHOLD = 1.5
RATE_MIN_K = 100


class SyntheticKind(str, enum.Enum):
    SDL_BERNOULLI_GAUSSIAN = "sdl_bernoulli_gaussian"
    DPCP_INLIER_OUTLIER = "dpcp_inlier_outlier"
    SPCA_GAUSSIAN = "spca_gaussian"


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of a synthetic instance.

    ``m`` is the number of samples (SDL, SPCA; SDL defaults to
    ``floor(10 n^1.5)``). DPCP takes either ``inliers``/``outliers`` counts or
    a total ``m`` split by ``outlier_ratio``.
    """

    kind: SyntheticKind
    n: int
    s: int = 1
    m: Optional[int] = None
    theta: float = 0.5
    inliers: Optional[int] = None
    outliers: Optional[int] = None
    outlier_ratio: float = 0.5
    noise: float = 0.0
    lam: float = 0.5
    orthonormalize: bool = False
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", SyntheticKind(self.kind))
        if self.n < 1 or not (1 <= self.s <= self.n):
            raise DimensionError(f"need n >= 1 and 1 <= s <= n, got n={self.n}, s={self.s}")
        if self.m is not None and self.m < 1:
            raise DimensionError(f"m must be positive, got {self.m}")
        if not (0 < self.theta < 1):
            raise ParameterError(f"theta must lie in (0, 1), got {self.theta}")
        if not (0 <= self.outlier_ratio < 1):
            raise ParameterError(f"outlier_ratio must lie in [0, 1), got {self.outlier_ratio}")
        if self.noise < 0:
            raise ParameterError(f"noise must be >= 0, got {self.noise}")
        for name in ("inliers", "outliers"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise DimensionError(f"{name} must be >= 0, got {v}")

    def sample_count(self):
        if self.m is not None:
            return self.m
        return int(math.floor(10 * self.n**1.5))

    def dpcp_counts(self):
        if self.inliers is not None or self.outliers is not None:
            n_in, n_out = self.inliers or 0, self.outliers or 0
        else:
            total = self.sample_count()
            n_out = int(round(self.outlier_ratio * total))
            n_in = total - n_out
        if n_in + n_out < 1:
            raise DimensionError("DPCP instance needs at least one point")
        return n_in, n_out


def _unit_rows(Z):
    return Z / np.linalg.norm(Z, axis=1, keepdims=True)


def generate(spec):
    """Build a synthetic :class:`ProblemInstance` with ground truth.

    * SDL: ``X*`` an orthonormalized Gaussian matrix, ``S`` Bernoulli(theta)
      times standard Gaussian, ``Y = X* S`` (plus optional Gaussian noise).
    * DPCP: a random unit normal ``b*`` in ``R^n``; inliers are unit vectors of
      the hyperplane ``b*^perp`` plus Gaussian noise, outliers are uniform on
      the unit sphere; rows of the data matrix are the shuffled points.
    * SPCA: Gaussian samples, mean-centered, each feature row scaled to unit
      norm. No ground truth; the metric is the objective value.
    """
    rng = data_rng(spec.seed)
    n = spec.n
    if spec.kind is SyntheticKind.SDL_BERNOULLI_GAUSSIAN:
        m = spec.sample_count()
        X_star = polar_factor(rng.standard_normal((n, n)))[0]
        S = rng.standard_normal((n, m)) * (rng.random((n, m)) < spec.theta)
        Y = X_star @ S
        if spec.noise > 0:
            Y = Y + spec.noise * rng.standard_normal(Y.shape)
        return ProblemInstance(InstanceKind.SDL, Y, s=n, ground_truth=X_star, extras={"S": S})

    if spec.kind is SyntheticKind.DPCP_INLIER_OUTLIER:
        n_in, n_out = spec.dpcp_counts()
        b = rng.standard_normal(n)
        b /= np.linalg.norm(b)
        Z = rng.standard_normal((n_in, n))
        Z -= np.outer(Z @ b, b)
        Z = _unit_rows(Z)
        if spec.noise > 0:
            Z = Z + spec.noise * rng.standard_normal(Z.shape)
        O = _unit_rows(rng.standard_normal((n_out, n)))
        P = np.vstack([Z, O])
        inlier = np.concatenate([np.ones(n_in, bool), np.zeros(n_out, bool)])
        order = rng.permutation(n_in + n_out)
        P, inlier = P[order], inlier[order]
        x_opt = b[:, None]
        if spec.orthonormalize:
            Q, R = np.linalg.qr(P)
            d = np.abs(np.diag(R))
            if d.min() <= 1e-10 * d.max():
                raise DimensionError("orthonormalize needs points spanning R^n; add outliers")
            P = Q
            x_opt = R @ x_opt
            x_opt /= np.linalg.norm(x_opt)
        return ProblemInstance(
            InstanceKind.DPCP, P, s=1, ground_truth=x_opt, extras={"inlier_mask": inlier}
        )

    if spec.kind is SyntheticKind.SPCA_GAUSSIAN:
        m = spec.m if spec.m is not None else 10 * n
        B = rng.standard_normal((n, m))
        B = B - B.mean(axis=1, keepdims=True)
        A = B / np.linalg.norm(B, axis=1, keepdims=True)
        return ProblemInstance(InstanceKind.SPCA, A, s=spec.s, lam=spec.lam)

    raise ParameterError(f"unknown synthetic kind {spec.kind!r}")


# ---------------------------------------------------------------------------
# metrics


def sdl_error(X, X_star):
    """``sum_i |max_j |<X_i, X*_j>| - 1|`` over the columns ``X_i`` of ``X``.

    Zero exactly when the columns of ``X`` match those of ``X*`` up to
    permutation and sign.
    """
    X, X_star = as_matrix(X), as_matrix(X_star)
    if X.shape != X_star.shape:
        raise DimensionError(f"shape mismatch: {X.shape} vs {X_star.shape}")
    overlaps = np.abs(X.T @ X_star)
    return float(np.sum(np.abs(overlaps.max(axis=1) - 1.0)))


def dpcp_error(x_alg, x_opt, tol=1e-8):
    """Detection error ``sqrt(1 - <x_alg, x_opt>^2)`` of two unit vectors."""
    a = np.ravel(np.asarray(x_alg, dtype=float))
    b = np.ravel(np.asarray(x_opt, dtype=float))
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch: {a.shape} vs {b.shape}")
    for name, v in (("x_alg", a), ("x_opt", b)):
        if abs(np.linalg.norm(v) - 1.0) > tol:
            raise ParameterError(f"{name} must have unit norm (got {np.linalg.norm(v):.3g})")
    c = min(abs(float(a @ b)), 1.0)
    return math.sqrt(max(0.0, 1.0 - c * c))


def metric_for(instance, problem=None):
    """Problem-specific error metric as a callable of a point, or ``None``.

    SDL and DPCP with ground truth use :func:`sdl_error` / :func:`dpcp_error`;
    SPCA tracks the true objective value (needs ``problem``).
    """
    truth = instance.ground_truth
    if instance.kind is InstanceKind.SDL and truth is not None:
        return lambda X: sdl_error(X, truth)
    if instance.kind is InstanceKind.DPCP and truth is not None:
        return lambda X: dpcp_error(np.ravel(X) / np.linalg.norm(X), truth)
    if instance.kind is InstanceKind.SPCA and problem is not None:
        return lambda X: true_value(problem, X)
    return None


# ---------------------------------------------------------------------------
# trace files


def _fmt(v):
    return "" if v is None else "%.17g" % v


def format_trace_row(r):
    return ",".join(
        [str(int(r.k))]
        + [_fmt(v) for v in (r.mu, r.eta, r.step, r.grad_norm, r.f_smooth, r.f_true, r.metric, r.elapsed_s)]
    )


def write_trace(path, trace, stride=1):
    """Write trace rows as CSV, keeping every ``stride``-th row and the last."""
    if stride < 1:
        raise ParameterError(f"stride must be >= 1, got {stride}")
    rows = list(trace)
    keep = [r for i, r in enumerate(rows) if i % stride == 0 or i == len(rows) - 1]
    lines = [TRACE_HEADER] + [format_trace_row(r) for r in keep]
    Path(path).write_text("\n".join(lines) + "\n")


def read_trace(path):
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].strip() != TRACE_HEADER:
        raise ParameterError(f"{path}: trace header must be {TRACE_HEADER!r}")
    out = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 9:
            raise ParameterError(f"{path}: line {lineno} has {len(parts)} fields, expected 9")
        k = int(parts[0])
        vals = [float(v) if v != "" else None for v in parts[1:]]
        out.append(IterationTrace(k, *vals))
    return out


# ---------------------------------------------------------------------------
# rate statistic


def window_best_norms(trace):
    """``min grad_norm_j`` over recorded ``j in [floor(k/2), k]`` for each row."""
    dq = deque()
    out = []
    for r in trace:
        while dq and dq[-1][1] > r.grad_norm:
            dq.pop()
        dq.append((r.k, r.grad_norm))
        while dq[0][0] < r.k // 2:
            dq.popleft()
        out.append(dq[0][1])
    return np.array(out)


@dataclass(frozen=True)
class RateStatistic:
    """``s_k = (window-best gradient norm) * k^(1/(4-p))`` summarized.

    Rows are split at the geometric midpoint of the covered ``k`` range;
    ``ratio = max(tail) / max(head)`` stays near or below 1 for a bounded
    ``s_k`` and grows like ``(k_last/k_split)^(1/(4-p))`` when it is not.
    """

    head_max: float
    tail_max: float
    ratio: float
    split_k: float
    records: int
    violated: bool


def rate_report(trace, p, threshold=RATE_THRESHOLD, min_k=RATE_MIN_K):
    trace = [r for r in trace if r.k >= 1]
    if len(trace) < 2 or trace[-1].k < min_k:
        raise UnavailableError(f"rate statistic needs a trace reaching k >= {min_k}")
    ks = np.array([r.k for r in trace], dtype=float)
    s = window_best_norms(trace) * ks ** (1.0 / (4.0 - p))
    split = math.sqrt(ks[0] * ks[-1])
    head, tail = s[ks <= split], s[ks > split]
    if head.size == 0 or tail.size == 0:
        raise UnavailableError("trace too sparse to split into head and tail")
    head_max, tail_max = float(head.max()), float(tail.max())
    ratio = tail_max / head_max if head_max > 0 else (math.inf if tail_max > 0 else 1.0)
    return RateStatistic(head_max, tail_max, ratio, split, len(trace), ratio > threshold)


# ---------------------------------------------------------------------------
# run reports


@dataclass
class RunReport:
    """Key-value summary of one solver run.

    Keys in the written file (``key = value``, one per line; empty values
    mean "not available")::

        solver, problem, p, seed, stop_reason, wall_time_s, trace_file,
        iterations, retractions,
        final_k, final_mu, final_grad_norm, final_f_smooth, final_f_true, final_metric,
        best_k, best_grad_norm,
        rate_head_max, rate_tail_max, rate_ratio, rate_split_k, rate_violated,
        config.<name>   (one line per echoed configuration entry)

    Everything except the config echo, ``stop_reason``, ``wall_time_s``,
    ``iterations`` and ``retractions`` is recomputable from the trace file.
    """

    solver: str
    problem: str
    p: float
    seed: int
    stop_reason: str
    wall_time_s: float
    trace_file: str
    iterations: int
    retractions: int
    final_k: Optional[int] = None
    final_mu: Optional[float] = None
    final_grad_norm: Optional[float] = None
    final_f_smooth: Optional[float] = None
    final_f_true: Optional[float] = None
    final_metric: Optional[float] = None
    best_k: Optional[int] = None
    best_grad_norm: Optional[float] = None
    rate_head_max: Optional[float] = None
    rate_tail_max: Optional[float] = None
    rate_ratio: Optional[float] = None
    rate_split_k: Optional[float] = None
    rate_violated: Optional[bool] = None
    config: dict = field(default_factory=dict)

    def to_text(self):
        lines = []
        for f in fields(self):
            if f.name == "config":
                continue
            lines.append(f"{f.name} = {_report_value(getattr(self, f.name))}")
        for key in sorted(self.config):
            lines.append(f"config.{key} = {_report_value(self.config[key])}")
        return "\n".join(lines) + "\n"

    def write(self, path):
        Path(path).write_text(self.to_text())


def _report_value(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return "%.17g" % v
    return str(v)


_INT_KEYS = {"seed", "iterations", "retractions", "final_k", "best_k"}
_STR_KEYS = {"solver", "problem", "stop_reason", "trace_file"}


def read_report(path):
    kv = {}
    config = {}
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        key, _, val = line.partition(" = ")
        if key.startswith("config."):
            config[key[len("config."):]] = val
            continue
        if val == "":
            kv[key] = None
        elif key in _STR_KEYS:
            kv[key] = val
        elif key in _INT_KEYS:
            kv[key] = int(val)
        elif key == "rate_violated":
            kv[key] = val == "true"
        else:
            kv[key] = float(val)
    return RunReport(**kv, config=config)


def trace_summary(trace, p):
    """The trace-derived part of a :class:`RunReport` as a dict."""
    out = {}
    if trace:
        last = trace[-1]
        best = window_best_norms(trace)[-1]
        best_k = min(r.k for r in trace if r.k >= last.k // 2 and r.grad_norm == best)
        out.update(
            final_k=last.k,
            final_mu=last.mu,
            final_grad_norm=last.grad_norm,
            final_f_smooth=last.f_smooth,
            final_f_true=last.f_true,
            final_metric=last.metric,
            best_k=best_k,
            best_grad_norm=float(best),
        )
        try:
            st = rate_report(trace, p)
        except UnavailableError:
            pass
        else:
            out.update(
                rate_head_max=st.head_max,
                rate_tail_max=st.tail_max,
                rate_ratio=st.ratio,
                rate_split_k=st.split_k,
                rate_violated=st.violated,
            )
    return out


def build_report(result, trace, p, problem_name, seed, trace_file, config=None):
    return RunReport(
        solver=result.solver,
        problem=problem_name,
        p=p,
        seed=seed,
        stop_reason=result.stop_reason,
        wall_time_s=result.elapsed_s,
        trace_file=str(trace_file),
        iterations=result.iterations,
        retractions=result.retractions,
        config=dict(config or {}),
        **trace_summary(trace, p),
    )
