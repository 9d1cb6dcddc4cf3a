"""Adversarial estimation of structural parameters.

The objective at ``theta`` is the best cross-entropy a discriminator can
reach when separating the real sample from a sample simulated at ``theta``.
Shocks are drawn once per run (common random numbers) so the objective is a
deterministic function of ``theta``.  The outer minimization uses central
finite differences with RPROP (default), Nesterov momentum or plain steps in
box-scaled coordinates.
"""
from __future__ import annotations

import csv
import json
import logging
import time
import warnings
from collections import OrderedDict
from dataclasses import asdict, dataclass, field

import numpy as np

from .dp import ExogenousProcesses, StateGrid, solve_policy
from .nn import LOSS_AT_HALF, NetworkArch, TrainConfig, cross_entropy, train_discriminator
from .params import DEFAULT_BETA, DEFAULT_R, DomainError, FiscalParams, PreferenceParams
from .sim import Initials, ShockSet, augment_real, build_features, simulate_panel

log = logging.getLogger(__name__)

STRUCTURAL_NAMES = ("nu", "mpc", "k_curv")


# ---------------------------------------------------------------------------
# simulators: callables mapping theta to a simulated feature matrix

class StructuralSimulator:
    """Solve the DP at ``theta = (nu, MPC, K)`` and simulate with fixed shocks."""

    names = STRUCTURAL_NAMES

    def __init__(self, procs: ExogenousProcesses, fiscal: FiscalParams, grid: StateGrid,
                 shocks: ShockSet, initials: Initials, spec: str = "X1",
                 beta: float = DEFAULT_BETA, r: float = DEFAULT_R, cache_size: int = 4):
        if shocks.m < len(initials):
            raise DomainError("fewer shock paths than simulated individuals")
        self.procs, self.fiscal, self.grid = procs, fiscal, grid
        self.shocks, self.initials, self.spec = shocks, initials, spec
        self.beta, self.r = beta, r
        self.cache_size = cache_size
        self._cache: OrderedDict = OrderedDict()

    def params(self, theta) -> PreferenceParams:
        nu, mpc, k = (float(v) for v in theta)
        return PreferenceParams(nu, mpc, k, beta=self.beta, r=self.r)

    def policy(self, theta):
        key = tuple(float(v) for v in theta)
        if key in self._cache:
            self._cache.move_to_end(key)
            return self._cache[key]
        sol = solve_policy(self.params(theta), self.fiscal, self.procs, self.grid)
        self._cache[key] = sol
        if len(self._cache) > self.cache_size:
            self._cache.popitem(last=False)
        return sol

    def panel(self, theta, procs: ExogenousProcesses | None = None):
        if procs is None:
            sol = self.policy(theta)
            procs = self.procs
        else:
            sol = solve_policy(self.params(theta), self.fiscal, procs, self.grid)
        return simulate_panel(sol, procs, self.fiscal, self.shocks, self.initials, self.r)

    def __call__(self, theta) -> np.ndarray:
        return build_features(self.panel(theta), self.spec)

    def resample(self, idx) -> "StructuralSimulator":
        """Same economy with simulated individuals (shocks and initial states) redrawn."""
        return StructuralSimulator(self.procs, self.fiscal, self.grid, self.shocks.take(idx),
                                   self.initials.take(idx), self.spec, self.beta, self.r,
                                   self.cache_size)

    @property
    def m(self) -> int:
        return len(self.initials)

    def __getstate__(self):
        state = self.__dict__.copy()
        state["_cache"] = OrderedDict()
        return state


class GaussianLocationSimulator:
    """Toy model ``x = theta + eps`` with fixed standard-normal ``eps``.

    The efficient estimator of ``theta`` from real draws ``x_i`` and these
    shocks is the difference of sample means.
    """

    names = ("location",)

    def __init__(self, eps):
        self.eps = np.asarray(eps, float).ravel()

    def __call__(self, theta) -> np.ndarray:
        return (float(theta[0]) + self.eps)[:, None]

    def resample(self, idx) -> "GaussianLocationSimulator":
        return GaussianLocationSimulator(self.eps[np.asarray(idx)])

    @property
    def m(self) -> int:
        return len(self.eps)

    def oracle(self, real) -> float:
        return float(np.mean(real) - np.mean(self.eps))


# ---------------------------------------------------------------------------
# configuration and results

@dataclass(frozen=True)
class EstimationConfig:
    """Outer-loop settings.  ``lower``/``upper``/``steps`` are per coordinate.

    A run converges when the scaled gradient is below ``tol`` in every
    coordinate, or when it stalls: the last ``stall_window`` iterates span
    less than ``stall_xtol`` of the box in every coordinate.  The second rule
    covers objectives whose finite-difference gradient is dominated by
    discriminator-training noise; set ``stall_window=0`` to disable it.
    """

    lower: tuple = (1.5, 0.02, 500.0)
    upper: tuple = (8.0, 1.0, 40_000.0)
    steps: tuple = (0.05, 0.005, 250.0)
    spec: str = "X1"
    hidden: tuple = (5,)
    train: TrainConfig = field(default_factory=lambda: TrainConfig(optimizer="lbfgs"))
    accelerator: str = "rprop"
    learning_rate: float = 0.05
    momentum: float = 0.9
    rprop_init: float = 0.02
    rprop_min: float = 1e-3
    rprop_max: float = 0.1
    rprop_up: float = 1.2
    rprop_down: float = 0.5
    tol: float = 0.02
    stall_window: int = 10
    stall_xtol: float = 0.02
    max_iter: int = 60
    restarts: int = 1
    seed: int = 0
    init_mean: tuple | None = None
    init_sd: tuple | None = None

    def __post_init__(self):
        lo, hi, st = (np.asarray(v, float) for v in (self.lower, self.upper, self.steps))
        if not (lo.shape == hi.shape == st.shape) or lo.ndim != 1:
            raise DomainError("lower, upper and steps need one entry per parameter")
        if not np.all(np.isfinite(lo)) or not np.all(np.isfinite(hi)) or np.any(lo >= hi):
            raise DomainError("box bounds must be finite with lower < upper")
        if np.any(st <= 0):
            raise DomainError("finite-difference steps must be positive")
        if self.restarts < 1:
            raise DomainError("at least one restart is required")
        if self.accelerator not in ("rprop", "nag", "plain"):
            raise DomainError(f"unknown accelerator {self.accelerator!r}")
        if self.stall_window < 0 or self.stall_xtol <= 0:
            raise DomainError("stall_window must be nonnegative and stall_xtol positive")
        if self.max_iter < 1 or self.tol <= 0:
            raise DomainError("max_iter must be positive and tol positive")
        if self.init_sd is not None and self.init_mean is None:
            raise DomainError("init_sd needs init_mean")

    @property
    def width(self) -> np.ndarray:
        return np.asarray(self.upper, float) - np.asarray(self.lower, float)

    def arch(self, n_inputs: int) -> NetworkArch:
        return NetworkArch.discriminator(n_inputs, self.hidden)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["train"] = asdict(self.train)
        return d

    @classmethod
    def structural(cls, lower=(1.5, 0.02, 500.0), upper=(8.0, 1.0, 40_000.0), **kw) -> "EstimationConfig":
        """Box for ``(nu, MPC, K)``; MPC's upper end 1 is the no-bequest model."""
        if not (0 < lower[1] and upper[1] <= 1):
            raise DomainError("the MPC box must lie in (0, 1]")
        return cls(lower=tuple(lower), upper=tuple(upper), **kw)


@dataclass
class EstimateResult:
    theta: np.ndarray
    loss: float
    converged: bool
    restart: int
    traces: list
    wall_time: float
    names: tuple = STRUCTURAL_NAMES
    n_evaluations: int = 0
    stop_reasons: tuple = ()

    def derived(self) -> dict:
        """Bequest intensity and asset floor implied by a structural estimate."""
        if tuple(self.names) != STRUCTURAL_NAMES:
            return {}
        p = PreferenceParams(*(float(v) for v in self.theta))
        return {"theta_intensity": p.theta_intensity, "asset_floor": p.asset_floor}

    def to_dict(self) -> dict:
        return {
            "theta": dict(zip(self.names, map(float, self.theta))), "derived": self.derived(),
            "loss": self.loss, "converged": self.converged, "restart": self.restart,
            "wall_time": self.wall_time, "n_evaluations": self.n_evaluations,
            "stop_reasons": list(self.stop_reasons),
            "traces": self.traces,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    def traces_to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["restart", "iteration", *self.names, "loss",
                        *(f"grad_{n}" for n in self.names)])
            for r, trace in enumerate(self.traces):
                for it, row in enumerate(trace):
                    w.writerow([r, it, *row["theta"], row["loss"], *row["grad"]])


# ---------------------------------------------------------------------------
# objective

class AdversarialProblem:
    """Real features, a simulator and discriminator settings.

    The real sample is topped up by resampling to the simulated sample size
    when the latter is larger.
    """

    def __init__(self, real, simulator, hidden=(5,), train: TrainConfig | None = None,
                 augment_seed: int = 0):
        real = np.asarray(real, float)
        if real.ndim != 2 or real.shape[0] == 0:
            raise DomainError("real features must be a nonempty matrix")
        self.real = real
        self.simulator = simulator
        self.hidden = tuple(hidden)
        self.train = train or TrainConfig(optimizer="lbfgs")
        self.augment_seed = augment_seed
        m = simulator.m
        self.real_augmented = augment_real(real, m, augment_seed) if m > len(real) else real
        self.arch = NetworkArch.discriminator(real.shape[1], self.hidden)
        self.n_evaluations = 0

    def objective(self, theta) -> float:
        sim = self.simulator(theta)
        with warnings.catch_warnings():
            # the intercept column is constant by construction
            warnings.filterwarnings("ignore", "columns .* zero variance", UserWarning)
            net = train_discriminator(self.real_augmented, sim, self.arch, self.train)
        self.n_evaluations += 1
        return cross_entropy(net, self.real_augmented, sim)

    def resample(self, real_idx, sim_idx) -> "AdversarialProblem":
        return AdversarialProblem(self.real[np.asarray(real_idx)], self.simulator.resample(sim_idx),
                                  self.hidden, self.train, self.augment_seed)


def objective(theta, problem: AdversarialProblem) -> float:
    """Inner maximum of the adversarial criterion at ``theta``."""
    return problem.objective(theta)


def evaluate_foreign_estimates(theta, problem: AdversarialProblem) -> float:
    """Loss of an externally obtained parameter vector (e.g. another estimator's)."""
    return problem.objective(theta)


def _fd_offsets(theta, steps, lower, upper):
    theta = np.asarray(theta, float)
    steps = np.asarray(steps, float)
    lo = np.full_like(theta, -np.inf) if lower is None else np.asarray(lower, float)
    hi = np.full_like(theta, np.inf) if upper is None else np.asarray(upper, float)
    h_up = np.maximum(np.minimum(steps, hi - theta), 0.0)
    h_dn = np.maximum(np.minimum(steps, theta - lo), 0.0)
    return h_up, h_dn


def numeric_gradient(f, theta, steps, lower=None, upper=None, f0=None, map_fn=map) -> np.ndarray:
    """Central differences, shrinking the step near the box bounds.

    Evaluates ``f`` at ``theta +/- step`` per coordinate.  At a bound the
    difference becomes one-sided against ``f0 = f(theta)`` (computed if not
    given).
    """
    theta = np.asarray(theta, float)
    h_up, h_dn = _fd_offsets(theta, steps, lower, upper)
    points, where = [], []
    for j in range(theta.size):
        if h_up[j] > 0:
            e = theta.copy()
            e[j] += h_up[j]
            points.append(e)
            where.append((j, +1))
        if h_dn[j] > 0:
            e = theta.copy()
            e[j] -= h_dn[j]
            points.append(e)
            where.append((j, -1))
    values = list(map_fn(f, points))
    up = np.full(theta.size, np.nan)
    dn = np.full(theta.size, np.nan)
    for (j, s), v in zip(where, values):
        if s > 0:
            up[j] = v
        else:
            dn[j] = v
    need_center = np.any(np.isnan(up) | np.isnan(dn))
    if need_center and f0 is None:
        f0 = f(theta)
    grad = np.zeros(theta.size)
    for j in range(theta.size):
        if h_up[j] > 0 and h_dn[j] > 0:
            grad[j] = (up[j] - dn[j]) / (h_up[j] + h_dn[j])
        elif h_up[j] > 0:
            grad[j] = (up[j] - f0) / h_up[j]
        elif h_dn[j] > 0:
            grad[j] = (f0 - dn[j]) / h_dn[j]
    return grad


# ---------------------------------------------------------------------------
# outer loop

def initial_theta(cfg: EstimationConfig, restart: int) -> np.ndarray:
    """Starting point of a restart: normal draw around ``init_mean`` (or the box
    center for restarts after the first), clipped into the box."""
    lo, hi = np.asarray(cfg.lower, float), np.asarray(cfg.upper, float)
    center = (lo + hi) / 2 if cfg.init_mean is None else np.asarray(cfg.init_mean, float)
    if cfg.init_sd is None:
        if restart == 0:
            return np.clip(center, lo, hi)
        sd = (hi - lo) / 6
    else:
        sd = np.asarray(cfg.init_sd, float)
    rng = np.random.default_rng([cfg.seed, restart])
    return np.clip(center + sd * rng.standard_normal(lo.size), lo, hi)


def _evaluate(problem, points, executor):
    if executor is None:
        return [problem.objective(p) for p in points]
    return list(executor.map(_remote_objective, [problem] * len(points), points))


def _remote_objective(problem, theta):
    return problem.objective(theta)


def _run(problem, cfg: EstimationConfig, restart: int, executor=None):
    lo, hi = np.asarray(cfg.lower, float), np.asarray(cfg.upper, float)
    width = hi - lo
    u = (initial_theta(cfg, restart) - lo) / width
    steps_u = np.full(lo.size, cfg.rprop_init)
    prev_g = np.zeros(lo.size)
    velocity = np.zeros(lo.size)
    trace = []
    stop = "max_iter"

    def to_theta(v):
        return lo + np.clip(v, 0.0, 1.0) * width

    for it in range(cfg.max_iter):
        point = np.clip(u + cfg.momentum * velocity, 0, 1) if cfg.accelerator == "nag" else u
        theta = to_theta(point)
        h_up, h_dn = _fd_offsets(theta, cfg.steps, lo, hi)
        probes = [theta]
        for j in range(lo.size):
            for s, h in ((+1, h_up[j]), (-1, h_dn[j])):
                if h > 0:
                    e = theta.copy()
                    e[j] += s * h
                    probes.append(e)
        values = _evaluate(problem, probes, executor)
        lookup = {tuple(p): v for p, v in zip(probes, values)}
        loss = values[0]
        grad = numeric_gradient(lambda t: lookup[tuple(t)], theta, cfg.steps, lo, hi, f0=loss)
        g_u = grad * width
        trace.append({"theta": theta.tolist(), "loss": float(loss), "grad": grad.tolist(),
                      "grad_scaled": g_u.tolist(),
                      "probes": [[p.tolist(), float(v)] for p, v in zip(probes[1:], values[1:])]})
        log.info("restart %d iter %d theta %s loss %.6f |g| %.4f", restart, it,
                 np.array2string(theta, precision=4), loss, np.max(np.abs(g_u)))
        if np.max(np.abs(g_u)) < cfg.tol:
            stop = "gradient"
            break
        if cfg.stall_window and len(trace) >= cfg.stall_window:
            recent = np.array([row["theta"] for row in trace[-cfg.stall_window:]])
            if np.all(np.ptp(recent, axis=0) / width < cfg.stall_xtol):
                stop = "stall"
                break
        if cfg.accelerator == "rprop":
            # iRprop-: grow steps while the sign holds, shrink and skip after a flip
            same = g_u * prev_g
            steps_u = np.where(same > 0, np.minimum(steps_u * cfg.rprop_up, cfg.rprop_max), steps_u)
            steps_u = np.where(same < 0, np.maximum(steps_u * cfg.rprop_down, cfg.rprop_min), steps_u)
            g_eff = np.where(same < 0, 0.0, g_u)
            u = np.clip(u - np.sign(g_eff) * steps_u, 0, 1)
            prev_g = g_eff
        elif cfg.accelerator == "nag":
            new_u = np.clip(point - cfg.learning_rate * g_u, 0, 1)
            velocity = new_u - u
            u = new_u
        else:
            u = np.clip(u - cfg.learning_rate * g_u, 0, 1)
    final = trace[-1]
    log.info("restart %d stopped by %s after %d iterations", restart, stop, len(trace))
    return np.asarray(final["theta"]), final["loss"], stop, trace


def estimate(problem: AdversarialProblem, cfg: EstimationConfig, executor=None) -> EstimateResult:
    """Minimize the adversarial loss over the box from each restart.

    Returns the final iterate of the restart with the lowest final loss.  The
    result is flagged not converged when every restart exhausted
    ``max_iter`` without meeting a stopping rule; ``stop_reasons`` records
    which rule ended each restart (``"gradient"``, ``"stall"`` or
    ``"max_iter"``).
    """
    start = time.perf_counter()
    n0 = problem.n_evaluations
    runs = [_run(problem, cfg, r, executor) for r in range(cfg.restarts)]
    best = min(range(len(runs)), key=lambda r: runs[r][1])
    theta, loss, _, _ = runs[best]
    names = getattr(problem.simulator, "names", tuple(f"theta{j}" for j in range(len(theta))))
    return EstimateResult(
        theta=theta, loss=float(loss), converged=any(r[2] != "max_iter" for r in runs), restart=best,
        traces=[r[3] for r in runs], wall_time=time.perf_counter() - start, names=tuple(names),
        n_evaluations=problem.n_evaluations - n0, stop_reasons=tuple(r[2] for r in runs),
    )


__all__ = [
    "StructuralSimulator", "GaussianLocationSimulator", "EstimationConfig", "EstimateResult",
    "AdversarialProblem", "objective", "evaluate_foreign_estimates", "numeric_gradient",
    "initial_theta", "estimate", "LOSS_AT_HALF", "STRUCTURAL_NAMES",
]
