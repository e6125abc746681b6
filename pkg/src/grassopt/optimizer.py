"""Inexact Riemannian gradient descent on the Grassmannian.

Both drivers iterate

    Delta_k = P_{x_k}(g_tilde_k)            (tangent projection of the oracle output)
    x_{k+1} = Exp_{x_k}(-eta_k * Delta_k)   (geodesic step)

:func:`rigd_run` takes ``eta_k`` from a fixed rule; :func:`rigd_ls_run` picks it
by backtracking from ``eta0`` until

    f(x_{k+1}) <= f(x_k) - sigma * eta_k * |Delta_k|^2.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from typing import Optional, Union

import numpy as np

from .errors import ConfigError, DivergedError, LineSearchStall, RunError, SingularChannelError
from .grassmann import GrassmannPoint, exp_map, project_tangent
from .objective import Objective
from .oracle import Exact, Oracle, gradient_at

TRACE_COLUMNS = (
    "k", "f", "J", "delta_norm", "grad_norm", "err_norm",
    "eta", "backtracks", "func_evals", "wall_ns",
)


# ---------------------------------------------------------------- step rules

@dataclass(frozen=True)
class Constant:
    eta: float

    def __post_init__(self):
        if not self.eta > 0:
            raise ConfigError(f"step size must be positive, got {self.eta}")

    def step(self, k: int) -> float:
        return self.eta


@dataclass(frozen=True)
class CorollaryI:
    """``eta = 1/(3L)`` (with ``alpha = 1/L``), for square-summable errors."""

    lipschitz: float

    def __post_init__(self):
        if not self.lipschitz > 0:
            raise ConfigError(f"Lipschitz constant must be positive, got {self.lipschitz}")

    def alpha(self, k: int) -> float:
        return 1.0 / self.lipschitz

    def step(self, k: int) -> float:
        return 1.0 / (3.0 * self.lipschitz)


@dataclass(frozen=True)
class CorollaryII:
    """``alpha_k = 1/(2L log^2(k+2))``, ``eta_k = alpha_k / 2``, for errors ~ (k+1)^-1/2."""

    lipschitz: float

    def __post_init__(self):
        if not self.lipschitz > 0:
            raise ConfigError(f"Lipschitz constant must be positive, got {self.lipschitz}")

    def alpha(self, k: int) -> float:
        return 1.0 / (2.0 * self.lipschitz * math.log(k + 2) ** 2)

    def step(self, k: int) -> float:
        return 0.5 * self.alpha(k)


StepRule = Union[Constant, CorollaryI, CorollaryII]


@dataclass(frozen=True)
class FixedStepConfig:
    step_rule: StepRule
    max_iters: int = 100
    grad_tol: float = 0.0

    def __post_init__(self):
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise ConfigError(f"max_iters must be a positive integer, got {self.max_iters}")
        if not self.grad_tol >= 0:
            raise ConfigError("grad_tol must be nonnegative")

    def snapshot(self) -> dict:
        rule = {"rule": type(self.step_rule).__name__, **asdict(self.step_rule)}
        return {"method": "rigd", "step": rule, "max_iters": self.max_iters, "grad_tol": self.grad_tol}


@dataclass(frozen=True)
class LineSearchConfig:
    eta0: float = 2.0
    beta: float = 0.7
    sigma: float = 1e-4
    max_backtracks: int = 60
    max_iters: int = 100
    grad_tol: float = 0.0
    warm_start: bool = False

    def __post_init__(self):
        if not self.eta0 > 0:
            raise ConfigError(f"eta0 must be positive, got {self.eta0}")
        if not 0 < self.beta < 1:
            raise ConfigError(f"beta must lie in (0, 1), got {self.beta}")
        if not 0 < self.sigma < 1:
            raise ConfigError(f"sigma must lie in (0, 1), got {self.sigma}")
        if int(self.max_backtracks) != self.max_backtracks or self.max_backtracks < 1:
            raise ConfigError("max_backtracks must be a positive integer")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise ConfigError("max_iters must be a positive integer")
        if not self.grad_tol >= 0:
            raise ConfigError("grad_tol must be nonnegative")

    def snapshot(self) -> dict:
        return {"method": "rigd_ls", **asdict(self)}


# --------------------------------------------------------------------- trace

@dataclass
class TraceRecord:
    k: int
    f_value: float
    j_value: Optional[float]
    delta_norm: float
    true_grad_norm: Optional[float]
    err_norm: Optional[float]
    eta_used: float
    backtracks: int
    func_evals: int
    wall_ns: int

    def row(self, timing: bool = True) -> list:
        return [
            self.k, self.f_value, self.j_value, self.delta_norm, self.true_grad_norm,
            self.err_norm, self.eta_used, self.backtracks, self.func_evals,
            self.wall_ns if timing else None,
        ]


@dataclass
class Trace:
    records: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    iterates: Optional[list] = None

    def __len__(self):
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        vals = [getattr(r, name) for r in self.records]
        return np.array([np.nan if v is None else v for v in vals], dtype=float)

    def to_csv(self, timing: bool = False) -> str:
        """CSV text; ``timing=False`` blanks ``wall_ns`` so reruns are byte-identical."""
        lines = [",".join(TRACE_COLUMNS)]
        for rec in self.records:
            lines.append(",".join(_fmt(v) for v in rec.row(timing)))
        return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def min_grad_so_far(trace) -> np.ndarray:
    """Running minimum of the squared true gradient norm."""
    g = trace.column("true_grad_norm") if isinstance(trace, Trace) else np.asarray(trace, dtype=float)
    if isinstance(trace, Trace):
        g = g ** 2
    return np.minimum.accumulate(g)


def thread_count() -> int:
    from threadpoolctl import threadpool_info

    counts = [info.get("num_threads", 1) for info in threadpool_info()]
    return int(max(counts)) if counts else 1


# ------------------------------------------------------------------- drivers

class _Runner:
    def __init__(self, objective: Objective, oracle: Oracle, x0: GrassmannPoint,
                 reference: Optional[Objective], keep_iterates: bool, metadata: Optional[dict],
                 snapshot: dict):
        self.objective = objective
        self.oracle = oracle
        self.reference = objective if reference is None else reference
        self.trace = Trace(iterates=[x0] if keep_iterates else None)
        self.trace.metadata = {
            "objective": objective.name,
            "oracle": oracle.describe(),
            "config": snapshot,
            "threads": thread_count(),
            **(metadata or {}),
        }
        self.func_evals = 0

    def value(self, x, objective=None) -> float:
        self.func_evals += 1
        f = float((objective or self.objective).value(x))
        if not math.isfinite(f):
            raise DivergedError(f"objective is not finite ({f})", self.trace)
        return f

    def trial_value(self, x, objective) -> float:
        # a trial point where a surrogate channel degenerates is rejected, not fatal
        try:
            return self.value(x, objective)
        except SingularChannelError:
            return math.inf

    def direction(self, x, k):
        try:
            g, err = gradient_at(self.oracle, self.objective, x, k, self.reference)
        except RunError as exc:
            exc.trace = self.trace
            raise
        if not np.all(np.isfinite(g)):
            raise DivergedError("oracle returned a non-finite gradient", self.trace)
        delta = project_tangent(x, g)
        if isinstance(self.oracle, Exact) and self.reference is self.objective:
            true_g = g
        else:
            true_g = self.reference.grad(x)
        true_norm = float(np.linalg.norm(project_tangent(x, true_g).mat))
        merit = self.reference.merit or self.objective.merit
        j = None if merit is None else float(merit(x))
        return delta, err, true_norm, j

    def record(self, x_next, **kw):
        self.trace.records.append(TraceRecord(func_evals=self.func_evals, **kw))
        if self.trace.iterates is not None:
            self.trace.iterates.append(x_next)

    def finish(self, x):
        self.trace.metadata["final"] = {"f": float(self.objective.value(x))}
        return x, self.trace


def rigd_run(objective: Objective, oracle: Oracle, x0: GrassmannPoint, cfg: FixedStepConfig,
             reference: Optional[Objective] = None, keep_iterates: bool = False,
             metadata: Optional[dict] = None):
    """Fixed-schedule inexact Riemannian gradient descent.

    Parameters
    ----------
    objective : Objective
        Function being minimized; its value is logged every iteration.
    oracle : Oracle
        Source of the (possibly inexact) ambient gradient.
    x0 : GrassmannPoint
        Starting subspace.
    cfg : FixedStepConfig
    reference : Objective, optional
        Objective whose gradient norm and merit are logged as the "true" ones.
        Defaults to ``objective``.
    keep_iterates : bool
        Store every iterate in ``trace.iterates``.

    Returns
    -------
    x_final, trace
    """
    run = _Runner(objective, oracle, x0, reference, keep_iterates, metadata, cfg.snapshot())
    x = x0
    for k in range(cfg.max_iters):
        t0 = time.perf_counter_ns()
        f = run.value(x)
        delta, err, true_norm, j = run.direction(x, k)
        dnorm = float(np.linalg.norm(delta.mat))
        if cfg.grad_tol > 0 and true_norm <= cfg.grad_tol:
            run.record(x, k=k, f_value=f, j_value=j, delta_norm=dnorm, true_grad_norm=true_norm,
                       err_norm=err, eta_used=0.0, backtracks=0,
                       wall_ns=time.perf_counter_ns() - t0)
            break
        eta = cfg.step_rule.step(k)
        x = exp_map(x, delta, -eta)
        run.record(x, k=k, f_value=f, j_value=j, delta_norm=dnorm, true_grad_norm=true_norm,
                   err_norm=err, eta_used=eta, backtracks=0, wall_ns=time.perf_counter_ns() - t0)
    return run.finish(x)


def sufficient_decrease(f_next: float, f_curr: float, sigma: float, eta: float, delta_norm: float) -> bool:
    """The acceptance predicate of the backtracking search."""
    return f_next <= f_curr - sigma * eta * delta_norm * delta_norm


def rigd_ls_run(objective: Objective, oracle: Oracle, x0: GrassmannPoint, cfg: LineSearchConfig,
                reference: Optional[Objective] = None, keep_iterates: bool = False,
                metadata: Optional[dict] = None):
    """Inexact Riemannian gradient descent with backtracking line search.

    Function values are assumed exact. They come from
    ``oracle.value_objective(objective, k)``, which is ``objective`` itself
    except for surrogate-statistics oracles, whose line search runs on the
    surrogate drawn for that iteration. The trial
    step restarts from ``eta0`` every iteration unless ``cfg.warm_start`` is
    set, in which case it restarts from the previous accepted step divided by
    ``beta``, capped at ``eta0``. Raises :class:`LineSearchStall` (carrying the
    partial trace) when ``max_backtracks`` shrinks do not produce sufficient
    decrease.
    """
    run = _Runner(objective, oracle, x0, reference, keep_iterates, metadata, cfg.snapshot())
    x = x0
    eta_prev = cfg.eta0
    f = None
    for k in range(cfg.max_iters):
        t0 = time.perf_counter_ns()
        delta, err, true_norm, j = run.direction(x, k)
        obj_k = oracle.value_objective(objective, k)
        if f is None or obj_k is not objective:
            f = run.value(x, obj_k)
        dnorm = float(np.linalg.norm(delta.mat))
        if cfg.grad_tol > 0 and true_norm <= cfg.grad_tol:
            run.record(x, k=k, f_value=f, j_value=j, delta_norm=dnorm, true_grad_norm=true_norm,
                       err_norm=err, eta_used=0.0, backtracks=0,
                       wall_ns=time.perf_counter_ns() - t0)
            break
        eta = min(cfg.eta0, eta_prev / cfg.beta) if cfg.warm_start else cfg.eta0
        backtracks = 0
        while True:
            y = exp_map(x, delta, -eta)
            fy = run.trial_value(y, obj_k)
            if sufficient_decrease(fy, f, cfg.sigma, eta, dnorm):
                break
            if backtracks >= cfg.max_backtracks:
                raise LineSearchStall(
                    f"no sufficient decrease after {backtracks} backtracks at k={k} "
                    f"(eta={eta:.3e}, |Delta|={dnorm:.3e})",
                    run.trace,
                )
            eta *= cfg.beta
            backtracks += 1
        run.record(y, k=k, f_value=f, j_value=j, delta_norm=dnorm, true_grad_norm=true_norm,
                   err_norm=err, eta_used=eta, backtracks=backtracks,
                   wall_ns=time.perf_counter_ns() - t0)
        x, f, eta_prev = y, fy, eta
    return run.finish(x)


def backtrack_bound(lipschitz: float, delta: float, sigma: float, beta: float, eta0: float) -> int:
    """Upper bound ``ceil(log_beta(eta_bar / eta0)) + 1`` on backtracks per iteration,
    with ``eta_bar = 2 (1 - delta - sigma (1 - delta)^2) / (L (1 + delta)^2)``."""
    eta_bar = 2.0 * (1.0 - delta - sigma * (1.0 - delta) ** 2) / (lipschitz * (1.0 + delta) ** 2)
    if eta_bar >= eta0:
        return 1
    return int(math.ceil(math.log(eta_bar / eta0) / math.log(beta))) + 1
