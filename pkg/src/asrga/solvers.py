"""Smoothing Riemannian gradient solvers.

* :func:`run_asrga` -- adaptive smoothing Riemannian gradient algorithm. The
  smoothing level follows ``mu_k = mu0 * k^(-1/(4-p))`` and the AdaGrad-type
  accumulator and stepsize are both scaled by ``mu_k^(2-p)``::

      eta_k^2 = eta_{k-1}^2 + mu_k^(2-p) ||G_k||^2
      X_{k+1} = R_{X_k}(-(mu_k^(2-p) / eta_k) G_k)

  where ``G_k`` is the Riemannian gradient of the smoothed objective at
  ``X_k``. The reported point is the window-best iterate: the ``X_j`` with
  the smallest ``||G_j||`` over ``j in [floor(k/2), k]``.
* :func:`run_naive_adagrad` -- the same schedule with the unscaled AdaGrad
  rule ``X_{k+1} = R(-G_k / eta_k)``, ``eta_k^2 = eta_{k-1}^2 + ||G_k||^2``.
* :func:`run_rssd` -- Riemannian smoothing steepest descent with Armijo
  backtracking and a gradient-triggered decrease of ``mu``. The trigger rule
  (shrink ``mu`` by ``theta`` once ``||G|| <= gamma_mu * mu``, and after a
  failed line search) is a reconstruction; the original method states it
  only by reference.
"""

from __future__ import annotations

import math
import time
from collections import deque
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from . import composite
from .errors import ParameterError, SolverAborted, UnavailableError
from .manifolds import check_point, project_tangent, random_point, retract_info

STOP_EPSILON = "epsilon"
STOP_MAX_ITERS = "max_iters"
STOP_MAX_SECONDS = "max_seconds"
STOP_METRIC = "metric_target"
STOP_LINE_SEARCH = "line_search_failed"


def smoothing_level(k, p, mu0=1.0, mu_floor=1e-8):
    """``max(mu0 * k^(-1/(4-p)), mu_floor)``."""
    return max(mu0 * k ** (-1.0 / (4.0 - p)), mu_floor)


@dataclass
class RunOptions:
    """Budgets, stopping targets and trace settings shared by all solvers.

    At least one of ``max_iters``, ``max_seconds`` and ``epsilon`` must be
    set. ``stride`` keeps every ``stride``-th trace row (the last iteration is
    always kept). ``record_time=None`` records wall-clock time only when a
    time budget is set, so iteration-budget runs give identical traces.
    """

    max_iters: Optional[int] = None
    max_seconds: Optional[float] = None
    epsilon: Optional[float] = None
    metric_target: Optional[float] = None
    mu0: float = 1.0
    mu_floor: float = 1e-8
    seed: int = 0
    stride: int = 1
    record_time: Optional[bool] = None

    def validate(self):
        if self.max_iters is None and self.max_seconds is None and self.epsilon is None:
            raise ParameterError("set at least one of max_iters, max_seconds, epsilon")
        if self.max_iters is not None and self.max_iters < 0:
            raise ParameterError(f"max_iters must be >= 0, got {self.max_iters}")
        if self.max_seconds is not None and not self.max_seconds >= 0:
            raise ParameterError(f"max_seconds must be >= 0, got {self.max_seconds}")
        if self.epsilon is not None and not self.epsilon > 0:
            raise ParameterError(f"epsilon must be positive, got {self.epsilon}")
        if not (0 < self.mu0 <= 1):
            raise ParameterError(f"mu0 must lie in (0, 1], got {self.mu0}")
        if not (0 < self.mu_floor <= self.mu0):
            raise ParameterError(f"mu_floor must lie in (0, mu0], got {self.mu_floor}")
        if self.stride < 1:
            raise ParameterError(f"stride must be >= 1, got {self.stride}")
        return self

    @property
    def timed(self):
        return self.max_seconds is not None if self.record_time is None else self.record_time


@dataclass
class AsrgaConfig(RunOptions):
    eta0: float = 1e-6

    def validate(self):
        super().validate()
        if not (np.isfinite(self.eta0) and self.eta0 > 0):
            raise ParameterError(f"eta0 must be positive, got {self.eta0}")
        return self


@dataclass
class RssdConfig(RunOptions):
    c1: float = 1e-4
    backtrack: float = 0.5
    theta: float = 0.5
    gamma_mu: float = 1.0
    max_backtracks: int = 50
    initial_step: Optional[float] = None  # None: 1/L_mu when constants are known, else 1

    def validate(self):
        super().validate()
        if not (0 < self.c1 < 1):
            raise ParameterError(f"c1 must lie in (0, 1), got {self.c1}")
        if not (0 < self.backtrack < 1):
            raise ParameterError(f"backtrack must lie in (0, 1), got {self.backtrack}")
        if not (0 < self.theta < 1):
            raise ParameterError(f"theta must lie in (0, 1), got {self.theta}")
        if not self.gamma_mu > 0:
            raise ParameterError(f"gamma_mu must be positive, got {self.gamma_mu}")
        if self.max_backtracks < 0:
            raise ParameterError(f"max_backtracks must be >= 0, got {self.max_backtracks}")
        if self.initial_step is not None and not self.initial_step > 0:
            raise ParameterError(f"initial_step must be positive, got {self.initial_step}")
        return self


@dataclass(frozen=True)
class IterationTrace:
    k: int
    mu: float
    eta: float
    step: float
    grad_norm: float
    f_smooth: float
    f_true: float
    metric: Optional[float]
    elapsed_s: float


class WindowEntry(NamedTuple):
    k: int
    grad_norm: float
    X: np.ndarray
    mu: float


class WindowBest:
    """Sliding-window argmin of gradient norms over ``j in [floor(k/2), k]``.

    A monotone deque: entries have strictly increasing gradient norms from
    front to back, so the front is always the window minimum and every entry
    that could still become the minimum keeps its point.
    """

    def __init__(self):
        self._entries = deque()

    def push(self, k, grad_norm, X, mu):
        entries = self._entries
        while entries and entries[-1].grad_norm > grad_norm:
            entries.pop()
        entries.append(WindowEntry(k, grad_norm, X, mu))
        left = k // 2
        while entries[0].k < left:
            entries.popleft()

    @property
    def best(self):
        return self._entries[0] if self._entries else None

    def __len__(self):
        return len(self._entries)


@dataclass
class SolverState:
    k: int
    X: np.ndarray
    eta_sq: float
    mu: float
    window: WindowBest = field(default_factory=WindowBest)
    retractions: int = 0
    fallbacks: int = 0
    started: float = field(default_factory=time.perf_counter)
    timed: bool = False

    @property
    def best(self):
        return self.window.best

    def elapsed(self):
        return time.perf_counter() - self.started


@dataclass
class SolverResult:
    """Outcome of a solver run.

    ``x`` is the reported point (window-best for the adaptive methods, last
    iterate for RSSD); ``mu`` and ``grad_norm`` belong to it.
    """

    solver: str
    x: np.ndarray
    mu: float
    grad_norm: float
    k_best: int
    x_last: np.ndarray
    iterations: int
    retractions: int
    fallbacks: int
    stop_reason: str
    trace: list
    elapsed_s: float

    @property
    def eps_success(self):
        return self.stop_reason == STOP_EPSILON


def _initial_point(prob, options, X0):
    if X0 is None:
        return random_point(prob.manifold, options.seed)
    return check_point(prob.manifold, X0)


def _adaptive_step(state, prob, options, scaled, metric=None, record=True):
    k = state.k
    p = prob.p
    mu = smoothing_level(k, p, options.mu0, options.mu_floor)
    X = state.X
    f, egrad = composite.evaluate(prob, X, mu, want_value=record)
    G = project_tangent(X, egrad)
    gn2 = float(np.vdot(G, G))
    gn = math.sqrt(gn2)
    if not math.isfinite(gn):
        raise SolverAborted(f"non-finite Riemannian gradient at iteration {k}")
    state.window.push(k, gn, X, mu)
    if scaled:
        scale = mu ** (2.0 - p)
        eta_sq = state.eta_sq + scale * gn2
        eta = math.sqrt(eta_sq)
        step = scale / eta
    else:
        eta_sq = state.eta_sq + gn2
        eta = math.sqrt(eta_sq)
        step = 1.0 / eta
    X_next, fell_back = retract_info(X, -step * G, prob.manifold.retraction)
    trace = None
    if record:
        trace = IterationTrace(
            k=k,
            mu=mu,
            eta=eta,
            step=step,
            grad_norm=gn,
            f_smooth=f,
            f_true=composite.true_value(prob, X),
            metric=None if metric is None else float(metric(X)),
            elapsed_s=state.elapsed() if state.timed else 0.0,
        )
    state.X = X_next
    state.k = k + 1
    state.eta_sq = eta_sq
    state.mu = mu
    state.retractions += 1
    state.fallbacks += int(fell_back)
    return state, trace


def asrga_step(state, prob, options, metric=None, record=True):
    """One ASRGA iteration at index ``state.k``; returns ``(state, trace)``.

    The state is advanced in place (``X_{k+1}``, ``eta_k^2``, window);
    ``trace`` describes ``X_k`` and is ``None`` when ``record`` is False.
    """
    return _adaptive_step(state, prob, options, True, metric, record)


def naive_adagrad_step(state, prob, options, metric=None, record=True):
    return _adaptive_step(state, prob, options, False, metric, record)


def _eps_reached(prob, entry, eps):
    if entry is None or entry.grad_norm > eps:
        return False
    # without penalty terms f_mu does not depend on mu
    return prob.m == 0 or entry.mu <= eps


def _run_adaptive(name, scaled, prob, options, X0, metric, eta0):
    options.validate()
    X = _initial_point(prob, options, X0)
    state = SolverState(k=1, X=X, eta_sq=eta0**2, mu=options.mu0, timed=options.timed)
    trace = []
    stop = STOP_MAX_ITERS if options.max_iters == 0 else None
    last_unrecorded = None
    while stop is None:
        k = state.k
        final_by_count = options.max_iters is not None and k >= options.max_iters
        record = final_by_count or (k - 1) % options.stride == 0
        X_k = state.X
        try:
            state, row = _adaptive_step(state, prob, options, scaled, metric, record)
        except SolverAborted as exc:
            exc.result = _adaptive_result(name, prob, state, trace, "nonfinite")
            raise
        if row is not None:
            trace.append(row)
            last_unrecorded = None
        else:
            last_unrecorded = (k, X_k, state.mu, state.eta_sq)
        if options.epsilon is not None and _eps_reached(prob, state.best, options.epsilon):
            stop = STOP_EPSILON
        elif (
            options.metric_target is not None
            and row is not None
            and row.metric is not None
            and row.metric <= options.metric_target
        ):
            stop = STOP_METRIC
        elif final_by_count:
            stop = STOP_MAX_ITERS
        elif options.max_seconds is not None and state.elapsed() >= options.max_seconds:
            stop = STOP_MAX_SECONDS
    if last_unrecorded is not None:
        trace.append(_late_row(prob, state, metric, last_unrecorded, scaled))
    return _adaptive_result(name, prob, state, trace, stop)


def _late_row(prob, state, metric, info, scaled):
    """Trace row for a final iteration that fell between strides."""
    k, X, mu, eta_sq = info
    f, egrad = composite.evaluate(prob, X, mu)
    gn = float(np.linalg.norm(project_tangent(X, egrad)))
    eta = math.sqrt(eta_sq)
    step = (mu ** (2.0 - prob.p) if scaled else 1.0) / eta
    return IterationTrace(
        k=k,
        mu=mu,
        eta=eta,
        step=step,
        grad_norm=gn,
        f_smooth=f,
        f_true=composite.true_value(prob, X),
        metric=None if metric is None else float(metric(X)),
        elapsed_s=state.elapsed() if state.timed else 0.0,
    )


def _adaptive_result(name, prob, state, trace, stop):
    best = state.best
    if best is None:
        # zero-iteration budget: report the starting point at mu_1
        mu = state.mu
        gn = float(np.linalg.norm(composite.smoothed_riemannian_gradient(prob, state.X, mu)))
        best = WindowEntry(0, gn, state.X, mu)
    return SolverResult(
        solver=name,
        x=best.X,
        mu=best.mu,
        grad_norm=best.grad_norm,
        k_best=best.k,
        x_last=state.X,
        iterations=state.k - 1,
        retractions=state.retractions,
        fallbacks=state.fallbacks,
        stop_reason=stop,
        trace=trace,
        elapsed_s=state.elapsed(),
    )


def run_asrga(prob, config, X0=None, metric=None):
    """Run ASRGA until a budget or the epsilon test stops it.

    With ``config.epsilon`` set the run stops once the window-best iterate
    ``X~`` satisfies ``||grad f_mu~(X~)|| <= eps`` with ``mu~ <= eps``. The
    returned ``x`` is ``X~``, not the last iterate.
    """
    return _run_adaptive("asrga", True, prob, config, X0, metric, config.eta0)


def run_naive_adagrad(prob, config, X0=None, metric=None):
    return _run_adaptive("naive_adagrad", False, prob, config, X0, metric, config.eta0)


def _trial_step(prob, config, mu):
    if config.initial_step is not None:
        return config.initial_step
    try:
        return 1.0 / composite.theory_constants(prob, mu).L_mu
    except UnavailableError:
        return 1.0


def run_rssd(prob, config, X0=None, metric=None):
    """Riemannian smoothing steepest descent with Armijo backtracking.

    At fixed ``mu`` every accepted step satisfies
    ``f_mu(X_{k+1}) <= f_mu(X_k) - c1 * t * ||G_k||^2``. Each trial point
    costs one retraction; ``retractions`` counts all of them.
    """
    config.validate()
    X = _initial_point(prob, config, X0)
    started = time.perf_counter()
    timed = config.timed
    mu = config.mu0
    f, egrad = composite.evaluate(prob, X, mu)
    G = project_tangent(X, egrad)
    gn2 = float(np.vdot(G, G))
    retractions = fallbacks = 0
    window = WindowBest()
    trace = []
    k = 0
    stop = STOP_MAX_ITERS if config.max_iters == 0 else None
    last_row = None
    while stop is None:
        k += 1
        while math.sqrt(gn2) <= config.gamma_mu * mu and mu > config.mu_floor:
            mu = max(config.theta * mu, config.mu_floor)
            f, egrad = composite.evaluate(prob, X, mu)
            G = project_tangent(X, egrad)
            gn2 = float(np.vdot(G, G))
        gn = math.sqrt(gn2)
        if not math.isfinite(gn) or not math.isfinite(f):
            raise SolverAborted(f"non-finite value or gradient at iteration {k}")
        window.push(k, gn, X, mu)
        t = _trial_step(prob, config, mu)
        accepted = None
        for _ in range(config.max_backtracks + 1):
            Xt, fb = retract_info(X, -t * G, prob.manifold.retraction)
            retractions += 1
            fallbacks += int(fb)
            ft = composite.evaluate(prob, Xt, mu, want_grad=False)[0]
            if ft <= f - config.c1 * t * gn2:
                accepted = (Xt, ft)
                break
            t *= config.backtrack
        final_by_count = config.max_iters is not None and k >= config.max_iters
        record = final_by_count or (k - 1) % config.stride == 0
        row = IterationTrace(
            k=k,
            mu=mu,
            eta=1.0 / t,
            step=t,
            grad_norm=gn,
            f_smooth=f,
            f_true=composite.true_value(prob, X) if record else math.nan,
            metric=None if (metric is None or not record) else float(metric(X)),
            elapsed_s=time.perf_counter() - started if timed else 0.0,
        )
        if record:
            trace.append(row)
            last_row = None
        else:
            last_row = (row, X)
        if accepted is not None:
            X, f = accepted
            G = project_tangent(X, composite.evaluate(prob, X, mu, want_value=False)[1])
            gn2 = float(np.vdot(G, G))
        elif mu <= config.mu_floor:
            stop = STOP_LINE_SEARCH
        else:
            mu = max(config.theta * mu, config.mu_floor)
            f, egrad = composite.evaluate(prob, X, mu)
            G = project_tangent(X, egrad)
            gn2 = float(np.vdot(G, G))
        if stop is not None:
            break
        if config.epsilon is not None and math.sqrt(gn2) <= config.epsilon and (
            mu <= config.epsilon or prob.m == 0
        ):
            stop = STOP_EPSILON
        elif (
            config.metric_target is not None
            and row.metric is not None
            and row.metric <= config.metric_target
        ):
            stop = STOP_METRIC
        elif final_by_count:
            stop = STOP_MAX_ITERS
        elif config.max_seconds is not None and time.perf_counter() - started >= config.max_seconds:
            stop = STOP_MAX_SECONDS
    if last_row is not None:
        row, Xr = last_row
        trace.append(
            IterationTrace(
                **{
                    **row.__dict__,
                    "f_true": composite.true_value(prob, Xr),
                    "metric": None if metric is None else float(metric(Xr)),
                }
            )
        )
    return SolverResult(
        solver="rssd",
        x=X,
        mu=mu,
        grad_norm=math.sqrt(gn2),
        k_best=k,
        x_last=X,
        iterations=k,
        retractions=retractions,
        fallbacks=fallbacks,
        stop_reason=stop,
        trace=trace,
        elapsed_s=time.perf_counter() - started,
    )


def verify_eps_stationary(prob, X, mu, eps):
    """Independent check of epsilon-approximate stationarity at ``(X, mu)``.

    Recomputes the smoothed Riemannian gradient from scratch and returns
    ``(ok, grad_norm)`` with ``ok`` meaning ``||grad f_mu(X)|| <= eps`` and
    ``mu <= eps`` (the latter is vacuous for problems without penalties).
    """
    G = composite.smoothed_riemannian_gradient(prob, X, mu)
    gn = float(np.linalg.norm(G))
    return gn <= eps and (mu <= eps or prob.m == 0), gn


SOLVERS = {
    "asrga": run_asrga,
    "rssd": run_rssd,
    "naive_adagrad": run_naive_adagrad,
}


def run_solver(name, prob, config, X0=None, metric=None):
    try:
        fn = SOLVERS[name]
    except KeyError:
        raise ParameterError(f"unknown solver {name!r}; choose from {sorted(SOLVERS)}") from None
    return fn(prob, config, X0=X0, metric=metric)
