"""Run configuration files (TOML) and their translation into solver inputs.

A run config looks like::

    seed = 0
    solvers = ["asrga", "rssd"]     # or "all"; default ["asrga"]
    out_dir = "runs/sdl"            # optional, --out-dir wins
    stride = 1                      # trace subsampling

    [problem]
    kind = "sdl"                    # spca | dpcp | sdl | nonneg_orth
    p = 0.5
    n = 10                          # synthetic data; or data = "Y.txt"

    [budget]
    max_iters = 1000                # and/or max_seconds, epsilon, metric_target

    [asrga]                         # optional per-solver sections
    eta0 = 1e-6

Unknown keys are rejected everywhere. Every problem is reported as a
:class:`ConfigError` carrying a ``line``/``field`` diagnostic.
"""

from __future__ import annotations

import re
from pathlib import Path
from typing import Literal, Optional, Union

import tomli
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    PrivateAttr,
    ValidationError,
    field_validator,
    model_validator,
)

from .bench import SyntheticKind, SyntheticSpec, generate, metric_for
from .composite import InstanceKind, ProblemInstance, build_problem, make_instance
from .errors import AsrgaError
from .matrixio import read_matrix
from .solvers import AsrgaConfig, RssdConfig

SOLVER_NAMES = ("asrga", "rssd", "naive_adagrad")


class ConfigError(AsrgaError, ValueError):
    pass


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ProblemModel(_Strict):
    kind: Literal["spca", "dpcp", "sdl", "nonneg_orth"]
    p: float
    generator: Literal["benchmark", "gaussian"] = "benchmark"
    n: Optional[int] = Field(default=None, ge=1)
    s: Optional[int] = Field(default=None, ge=1)
    m: Optional[int] = Field(default=None, ge=1)
    theta: float = Field(default=0.5, gt=0, lt=1)
    inliers: Optional[int] = Field(default=None, ge=0)
    outliers: Optional[int] = Field(default=None, ge=0)
    outlier_ratio: float = Field(default=0.5, ge=0, lt=1)
    noise: float = Field(default=0.0, ge=0)
    lam: Optional[float] = Field(default=None, gt=0)
    alpha: Optional[float] = Field(default=None, gt=0)
    orthonormalize: bool = False
    data: Optional[str] = None
    ground_truth: Optional[str] = None

    @field_validator("p")
    @classmethod
    def _p_range(cls, v):
        if not (0 < v <= 1):
            raise ValueError(f"p must lie in the range (0, 1], got {v}")
        return v

    @model_validator(mode="after")
    def _need_size(self):
        if self.data is None and self.n is None:
            raise ValueError("give either n (synthetic data) or data (matrix file)")
        if self.ground_truth is not None and self.data is None:
            raise ValueError("ground_truth needs data")
        return self


class BudgetModel(_Strict):
    max_iters: Optional[int] = Field(default=None, ge=0)
    max_seconds: Optional[float] = Field(default=None, ge=0)
    epsilon: Optional[float] = Field(default=None, gt=0)
    metric_target: Optional[float] = None

    @model_validator(mode="after")
    def _any_budget(self):
        if self.max_iters is None and self.max_seconds is None and self.epsilon is None:
            raise ValueError("set at least one of max_iters, max_seconds, epsilon")
        return self


class _Schedule(_Strict):
    mu0: float = Field(default=1.0, gt=0, le=1)
    mu_floor: float = Field(default=1e-8, gt=0)


class AdaptiveModel(_Schedule):
    eta0: float = Field(default=1e-6, gt=0)


class RssdModel(_Schedule):
    c1: float = Field(default=1e-4, gt=0, lt=1)
    backtrack: float = Field(default=0.5, gt=0, lt=1)
    theta: float = Field(default=0.5, gt=0, lt=1)
    gamma_mu: float = Field(default=1.0, gt=0)
    max_backtracks: int = Field(default=50, ge=0)
    initial_step: Optional[float] = Field(default=None, gt=0)


class RunConfig(_Strict):
    seed: int = 0
    solvers: Union[str, list[str]] = ["asrga"]
    out_dir: Optional[str] = None
    stride: int = Field(default=1, ge=1)
    problem: ProblemModel
    budget: BudgetModel
    asrga: AdaptiveModel = AdaptiveModel()
    naive_adagrad: AdaptiveModel = AdaptiveModel()
    rssd: RssdModel = RssdModel()
    _base_dir: Optional[Path] = PrivateAttr(default=None)

    @field_validator("solvers")
    @classmethod
    def _solvers(cls, v):
        names = [v] if isinstance(v, str) else list(v)
        out = []
        for name in names:
            name = name.replace("-", "_")
            if name == "all":
                out.extend(SOLVER_NAMES)
            elif name in SOLVER_NAMES:
                out.append(name)
            else:
                raise ValueError(f"unknown solver {name!r}; choose from asrga, rssd, naive-adagrad, all")
        if not out:
            raise ValueError("select at least one solver")
        return list(dict.fromkeys(out))


class SyntheticModel(_Strict):
    """Schema of a ``gen`` spec file (the fields of :class:`SyntheticSpec`)."""

    kind: Literal["sdl_bernoulli_gaussian", "dpcp_inlier_outlier", "spca_gaussian"]
    n: int = Field(ge=1)
    s: int = Field(default=1, ge=1)
    m: Optional[int] = Field(default=None, ge=1)
    theta: float = Field(default=0.5, gt=0, lt=1)
    inliers: Optional[int] = Field(default=None, ge=0)
    outliers: Optional[int] = Field(default=None, ge=0)
    outlier_ratio: float = Field(default=0.5, ge=0, lt=1)
    noise: float = Field(default=0.0, ge=0)
    lam: float = Field(default=0.5, gt=0)
    orthonormalize: bool = False
    seed: int = 0


# ---------------------------------------------------------------------------
# parsing with diagnostics


def _key_line(text, loc):
    """1-based line of the key at ``loc`` (e.g. ``("problem", "p")``), if found."""
    table = ()
    keys = [str(x) for x in loc if not isinstance(x, int)]
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        m = re.match(r"^\[\s*([^\]]+?)\s*\]$", line)
        if m:
            table = tuple(part.strip() for part in m.group(1).split("."))
            if list(table) == keys:
                return lineno
            continue
        m = re.match(r"^([A-Za-z0-9_\-]+)\s*=", line)
        if m and list(table) + [m.group(1)] == keys[: len(table) + 1] and len(keys) == len(table) + 1:
            return lineno
    return None


def _format_errors(exc, text, source):
    msgs = []
    for err in exc.errors():
        loc = tuple(err["loc"])
        field = ".".join(str(x) for x in loc) or "<root>"
        msg = err["msg"]
        if msg.startswith("Value error, "):
            msg = msg[len("Value error, "):]
        if err["type"] == "extra_forbidden":
            msg = "unknown key"
        line = _key_line(text, loc) if loc else None
        where = f"{source}:{line}" if line else source
        msgs.append(f"{where}: field {field}: {msg}")
    return "\n".join(msgs)


def _load(model, path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror or exc})") from None
    except UnicodeDecodeError:
        raise ConfigError(f"{path}: config is not valid UTF-8 text") from None
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: invalid TOML: {exc}") from None
    try:
        return model.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc, text, str(path))) from None


def load_run_config(path):
    cfg = _load(RunConfig, path)
    cfg._base_dir = Path(path).resolve().parent
    return cfg


def load_synthetic_spec(path):
    return _load(SyntheticModel, path)


def synthetic_spec(model, seed=None):
    data = model.model_dump()
    if seed is not None:
        data["seed"] = seed
    return SyntheticSpec(**data)


# ---------------------------------------------------------------------------
# config -> problem and solver configs

_BENCH_KIND = {
    "sdl": SyntheticKind.SDL_BERNOULLI_GAUSSIAN,
    "dpcp": SyntheticKind.DPCP_INLIER_OUTLIER,
    "spca": SyntheticKind.SPCA_GAUSSIAN,
}


def _resolve(cfg, name):
    p = Path(name)
    base = cfg._base_dir
    return p if p.is_absolute() or base is None else base / p


def build_instance(cfg, seed):
    """``(problem, instance, metric)`` described by ``cfg.problem``."""
    pm = cfg.problem
    kind = InstanceKind(pm.kind)
    try:
        if pm.data is not None:
            data = read_matrix(_resolve(cfg, pm.data))
            truth = None if pm.ground_truth is None else read_matrix(_resolve(cfg, pm.ground_truth))
            s = pm.s if pm.s is not None else (data.shape[0] if kind is InstanceKind.SDL else 1)
            inst = ProblemInstance(kind, data, s=s, lam=pm.lam, alpha=pm.alpha, ground_truth=truth)
            prob = build_problem(inst, pm.p)
        elif kind is InstanceKind.NONNEG_ORTH or pm.generator == "gaussian":
            dims = {"n": pm.n, "s": pm.s or 1}
            if pm.m is not None:
                dims["m"] = pm.m
            hp = {"p": pm.p}
            if pm.lam is not None:
                hp["lam"] = pm.lam
            if pm.alpha is not None:
                hp["alpha"] = pm.alpha
            prob, inst = make_instance(kind, dims, hp, seed)
        else:
            spec = SyntheticSpec(
                kind=_BENCH_KIND[pm.kind],
                n=pm.n,
                s=pm.s or 1,
                m=pm.m,
                theta=pm.theta,
                inliers=pm.inliers,
                outliers=pm.outliers,
                outlier_ratio=pm.outlier_ratio,
                noise=pm.noise,
                lam=0.5 if pm.lam is None else pm.lam,
                orthonormalize=pm.orthonormalize,
                seed=seed,
            )
            inst = generate(spec)
            prob = build_problem(inst, pm.p)
    except OSError as exc:
        raise ConfigError(f"problem: cannot read data file ({exc})") from None
    except (AsrgaError, ValueError) as exc:
        raise ConfigError(f"problem: {exc}") from None
    return prob, inst, metric_for(inst, prob)


def solver_config(cfg, name, seed, stride=None):
    b = cfg.budget
    common = dict(
        max_iters=b.max_iters,
        max_seconds=b.max_seconds,
        epsilon=b.epsilon,
        metric_target=b.metric_target,
        seed=seed,
        stride=stride or cfg.stride,
    )
    section = getattr(cfg, name).model_dump()
    out = RssdConfig(**common, **section) if name == "rssd" else AsrgaConfig(**common, **section)
    try:
        return out.validate()
    except ValueError as exc:
        raise ConfigError(f"{name}: {exc}") from None


def config_echo(cfg, name, seed):
    """Flat ``{key: value}`` of everything that determines a run."""
    echo = {"seed": seed}
    for key, val in cfg.problem.model_dump().items():
        echo[f"problem.{key}"] = val
    for key, val in cfg.budget.model_dump().items():
        echo[f"budget.{key}"] = val
    for key, val in getattr(cfg, name).model_dump().items():
        echo[f"{name}.{key}"] = val
    return echo


