"""Inference and reporting around the adversarial estimator.

Bootstrap intervals, the Monte Carlo harness, saving-motive counterfactuals,
asset fit profiles, the autoencoder dimension probe and the quadratic fit of
the loss surface near the optimum.
"""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .adversarial import (
    AdversarialProblem,
    EstimationConfig,
    StructuralSimulator,
    estimate,
)
from .calibration import InitialDistribution
from .dp import ExogenousProcesses, StateGrid, solve_policy
from .nn import TrainConfig, train_autoencoder
from .params import DomainError, FiscalParams, PreferenceParams
from .sim import Panel, WAVE_YEARS, build_features, draw_initials, draw_shocks, simulate_panel

log = logging.getLogger(__name__)

QUANTILES = (0.025, 0.05, 0.95, 0.975)
COHORTS = ((72, 76), (77, 81), (82, 86), (87, 91), (92, 200))


def summarize(estimates, names) -> list[dict]:
    """Mean, variance and quantile ranges per parameter.

    With fewer than two estimates the variance is NaN and ``variance_defined``
    is False.
    """
    est = np.asarray(estimates, float)
    rows = []
    for j, name in enumerate(names):
        col = est[:, j]
        q = np.quantile(col, QUANTILES) if len(col) else np.full(4, np.nan)
        rows.append({
            "parameter": name, "mean": float(np.mean(col)) if len(col) else np.nan,
            "variance": float(np.var(col, ddof=1)) if len(col) > 1 else np.nan,
            "q2.5": float(q[0]), "q97.5": float(q[3]), "range95": float(q[3] - q[0]),
            "q5": float(q[1]), "q95": float(q[2]), "range90": float(q[2] - q[1]),
            "variance_defined": len(col) > 1,
        })
    return rows


# ---------------------------------------------------------------------------
# bootstrap

@dataclass
class BootstrapResult:
    estimates: np.ndarray
    converged: np.ndarray
    names: tuple
    seed: int

    @property
    def kept(self) -> np.ndarray:
        return self.estimates[self.converged]

    @property
    def excluded(self) -> int:
        return int(np.sum(~self.converged))

    def summary(self) -> list[dict]:
        if len(self.kept) < 2:
            raise DomainError(f"only {len(self.kept)} converged replicates; need at least 2")
        return summarize(self.kept, self.names)

    @property
    def mean(self) -> np.ndarray:
        return self.kept.mean(axis=0)

    @property
    def sd(self) -> np.ndarray:
        return self.kept.std(axis=0, ddof=1)

    def to_json(self) -> str:
        return json.dumps({"names": list(self.names), "seed": self.seed,
                           "estimates": self.estimates.tolist(),
                           "converged": self.converged.tolist(), "excluded": self.excluded,
                           "summary": self.summary()}, sort_keys=True)


def bootstrap(problem: AdversarialProblem, cfg: EstimationConfig, S: int, seed: int,
              executor=None) -> BootstrapResult:
    """Re-estimate on ``S`` resamples of real rows and simulated individuals.

    Each replicate draws ``n`` real rows and ``m`` simulated shock paths with
    replacement and re-runs the estimator with the same initialization rule.
    Replicates that do not converge are kept in ``estimates`` but excluded
    from the summary.
    """
    if S < 2:
        raise DomainError("S must be at least 2")
    n, m = len(problem.real), problem.simulator.m
    estimates, flags = [], []
    for s in range(S):
        rng = np.random.default_rng([seed, s])
        sub = problem.resample(rng.integers(0, n, n), rng.integers(0, m, m))
        res = estimate(sub, cfg, executor)
        estimates.append(res.theta)
        flags.append(res.converged)
        log.info("bootstrap %d/%d theta %s converged %s", s + 1, S, res.theta, res.converged)
    names = getattr(problem.simulator, "names", tuple(f"theta{j}" for j in range(len(estimates[0]))))
    return BootstrapResult(np.array(estimates), np.array(flags, bool), tuple(names), seed)


# ---------------------------------------------------------------------------
# Monte Carlo

@dataclass(frozen=True)
class Economy:
    procs: ExogenousProcesses
    fiscal: FiscalParams
    grid: StateGrid
    initial_dist: InitialDistribution = field(default_factory=InitialDistribution)


def synthetic_real_panel(truth: PreferenceParams, economy: Economy, n: int, seed: int) -> Panel:
    """A "real" panel simulated at ``truth`` from the synthetic initial distribution."""
    sol = solve_policy(truth, economy.fiscal, economy.procs, economy.grid)
    ss = np.random.SeedSequence(seed).spawn(2)
    initials = draw_initials(n, int(ss[0].generate_state(1)[0]), economy.initial_dist)
    shocks = draw_shocks(n, int(ss[1].generate_state(1)[0]), economy.procs.t_min, economy.procs.t_max)
    panel = simulate_panel(sol, economy.procs, economy.fiscal, shocks, initials, truth.r)
    panel.real = True
    return panel


def build_problem(real_panel: Panel, economy: Economy, m: int, spec: str, hidden, train: TrainConfig,
                  seed: int, beta: float, r: float) -> AdversarialProblem:
    """Estimation problem whose simulated individuals start from the real 1996
    cross-section (resampled with replacement) and carry their own shocks."""
    ss = np.random.SeedSequence(seed).spawn(3)
    initials = real_panel.initials().resample(m, int(ss[0].generate_state(1)[0]))
    shocks = draw_shocks(m, int(ss[1].generate_state(1)[0]), economy.procs.t_min, economy.procs.t_max)
    sim = StructuralSimulator(economy.procs, economy.fiscal, economy.grid, shocks, initials, spec, beta, r)
    return AdversarialProblem(build_features(real_panel, spec), sim, hidden, train,
                              int(ss[2].generate_state(1)[0]))


@dataclass
class MonteCarloResult:
    truth: tuple
    names: tuple
    cells: list
    estimates: dict
    converged: dict
    losses: dict
    traces: dict
    seed: int

    def table(self) -> list[dict]:
        rows = []
        for cell in self.cells:
            key = _cell_key(cell)
            est = np.asarray(self.estimates[key])
            ok = np.asarray(self.converged[key], bool)
            for row in summarize(est[ok], self.names):
                row.update({"spec": cell[0], "hidden": "-".join(map(str, cell[1])) or "none",
                            "replications": int(ok.sum()), "excluded": int((~ok).sum())})
                rows.append(row)
        return rows

    def to_csv(self, path) -> None:
        rows = self.table()
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=["spec", "hidden", "parameter", "mean", "variance",
                                               "q2.5", "q97.5", "range95", "q5", "q95", "range90",
                                               "variance_defined", "replications", "excluded"])
            w.writeheader()
            w.writerows(rows)

    def to_json(self) -> str:
        return json.dumps({
            "truth": list(self.truth), "names": list(self.names), "seed": self.seed,
            "cells": [list(map(_jsonable, c)) for c in self.cells],
            "estimates": {k: np.asarray(v).tolist() for k, v in self.estimates.items()},
            "converged": {k: list(map(bool, v)) for k, v in self.converged.items()},
            "losses": self.losses, "table": self.table(),
        })


def _jsonable(v):
    return list(v) if isinstance(v, tuple) else v


def _cell_key(cell) -> str:
    return f"{cell[0]}:{'-'.join(map(str, cell[1])) or 'none'}"


def _mc_replication(args):
    truth, economy, n, m, cells, cfg, seed, r = args
    real_panel = synthetic_real_panel(truth, economy, n, int(np.random.SeedSequence([seed, r, 0]).generate_state(1)[0]))
    out = {}
    for spec, hidden in cells:
        problem = build_problem(real_panel, economy, m, spec, hidden, cfg.train,
                                int(np.random.SeedSequence([seed, r, 1]).generate_state(1)[0]),
                                truth.beta, truth.r)
        run_cfg = EstimationConfig(**{**cfg.__dict__, "spec": spec, "hidden": tuple(hidden),
                                      "seed": int(np.random.SeedSequence([seed, r, 2]).generate_state(1)[0])})
        res = estimate(problem, run_cfg)
        out[_cell_key((spec, hidden))] = res
        log.info("MC replication %d cell %s theta %s loss %.4f converged %s", r, (spec, hidden),
                 res.theta, res.loss, res.converged)
    return out


def monte_carlo(truth: PreferenceParams, R: int, n: int, economy: Economy,
                cells=(("X1", (5,)),), cfg: EstimationConfig | None = None, seed: int = 0,
                m: int | None = None, executor=None) -> MonteCarloResult:
    """Estimate on ``R`` synthetic economies generated at ``truth``.

    Replication ``r`` uses seeds derived from ``(seed, r)`` only, so results do
    not depend on scheduling.
    """
    if R < 1:
        raise DomainError("R must be at least 1")
    m = n if m is None else m
    if cfg is None:
        cfg = EstimationConfig.structural(
            init_mean=(truth.nu, truth.mpc, truth.k_curv), init_sd=(1.0, np.sqrt(0.025), 2_000.0))
    cells = [(spec, tuple(h)) for spec, h in cells]
    jobs = [(truth, economy, n, m, cells, cfg, seed, r) for r in range(R)]
    results = list(executor.map(_mc_replication, jobs)) if executor else [_mc_replication(j) for j in jobs]
    est, conv, losses, traces = {}, {}, {}, {}
    for cell in cells:
        key = _cell_key(cell)
        est[key] = [res[key].theta.tolist() for res in results]
        conv[key] = [res[key].converged for res in results]
        losses[key] = [res[key].loss for res in results]
        traces[key] = [res[key].traces for res in results]
    return MonteCarloResult((truth.nu, truth.mpc, truth.k_curv), ("nu", "mpc", "k_curv"), cells,
                            est, conv, losses, traces, seed)


# ---------------------------------------------------------------------------
# loss shape

def quadratic_fit(points, losses) -> tuple[float, np.ndarray]:
    """Least-squares full quadratic in ``points``; returns (R^2, coefficients)."""
    P = np.atleast_2d(np.asarray(points, float))
    y = np.asarray(losses, float)
    k = P.shape[1]
    cols = [np.ones(len(P))] + [P[:, i] for i in range(k)]
    cols += [P[:, i] * P[:, j] for i in range(k) for j in range(i, k)]
    A = np.column_stack(cols)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    tss = np.sum((y - y.mean()) ** 2)
    return float(1 - np.sum(resid ** 2) / tss) if tss > 0 else 1.0, coef


def pooled_loss_points(traces, lower, upper, radius: float = 0.15):
    """Trace points near each run's final iterate, in box-scaled deviations.

    Losses are taken relative to the run's final loss so runs can be pooled.
    Returns (deviations, relative losses).
    """
    lo, hi = np.asarray(lower, float), np.asarray(upper, float)
    devs, rel = [], []
    for trace in traces:
        final = np.asarray(trace[-1]["theta"])
        f_loss = trace[-1]["loss"]
        for row in trace:
            pts = [(row["theta"], row["loss"])] + [tuple(p) for p in row.get("probes", [])]
            for theta, loss in pts:
                d = (np.asarray(theta) - final) / (hi - lo)
                if np.max(np.abs(d)) <= radius:
                    devs.append(d)
                    rel.append(loss - f_loss)
    return np.array(devs), np.array(rel)


# ---------------------------------------------------------------------------
# counterfactuals

@dataclass
class CounterfactualTable:
    mode: str
    quintile: list
    baseline_k: np.ndarray
    counterfactual_k: np.ndarray

    @property
    def pct_difference(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return (self.baseline_k - self.counterfactual_k) / self.baseline_k * 100.0

    def rows(self) -> list[dict]:
        return [{"quintile": q, "baseline_k": float(b), f"{self.mode}_k": float(c), "pct_difference": float(p)}
                for q, b, c, p in zip(self.quintile, self.baseline_k, self.counterfactual_k,
                                      self.pct_difference)]

    def to_csv(self, path) -> None:
        rows = self.rows()
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)


def pi_quintiles(pi_rank) -> list[np.ndarray]:
    """Index sets of the five PI quintiles by rank; sizes differ by at most one."""
    order = np.argsort(np.asarray(pi_rank), kind="stable")
    return np.array_split(order, 5)


def assets_before_death(panel: Panel) -> tuple[np.ndarray, np.ndarray]:
    """Assets at the last wave observed alive, for individuals who die in the panel.

    Returns (values, mask of decedents).  Survivors through the last wave are
    excluded.
    """
    alive = panel.alive.astype(bool)
    died = ~alive[:, -1]
    last = alive.sum(axis=1) - 1
    values = panel.assets[np.arange(len(panel)), np.maximum(last, 0)]
    return np.where(died, values, 0.0), died


def counterfactual(theta, mode: str, simulator: StructuralSimulator) -> CounterfactualTable:
    """Total before-death assets by PI quintile, baseline vs a model without a
    saving motive (``no_bequest``: MPC = 1; ``no_medical_risk``: sigma = 0)."""
    if mode not in ("none", "no_bequest", "no_medical_risk"):
        raise DomainError(f"unknown counterfactual mode {mode!r}")
    base = simulator.panel(theta)
    if mode == "none":
        alt = base
    elif mode == "no_bequest":
        alt = simulator.panel((theta[0], 1.0, theta[2]))
    else:
        alt = simulator.panel(theta, procs=simulator.procs.without_medical_risk())
    groups = pi_quintiles(base.pi_rank)
    b_vals, _ = assets_before_death(base)
    c_vals, _ = assets_before_death(alt)
    b = np.array([b_vals[g].sum() for g in groups] + [b_vals.sum()]) / 1_000.0
    c = np.array([c_vals[g].sum() for g in groups] + [c_vals.sum()]) / 1_000.0
    return CounterfactualTable(mode, [1, 2, 3, 4, 5, "total"], b, c)


# ---------------------------------------------------------------------------
# fit profiles

def cohort_of(age_1996) -> np.ndarray:
    """Cohort number 1-5 by 1996 age band; 0 for ages below 72."""
    age = np.asarray(age_1996)
    out = np.zeros(age.shape, np.int64)
    for k, (lo, hi) in enumerate(COHORTS, start=1):
        out[(age >= lo) & (age <= hi)] = k
    return out


def pi_quintile_of(pi_rank) -> np.ndarray:
    """Quintile 1-5 of a PI rank in [0, 1]."""
    return np.minimum((np.asarray(pi_rank) * 5).astype(np.int64), 4) + 1


def fit_profiles(panel_real: Panel, panel_sim: Panel, by_gender: bool = False,
                 trim_top: float | None = None) -> list[dict]:
    """Mean and median assets of the living per cohort, PI quintile and wave.

    ``trim_top`` drops observations above that upper quantile of each wave's
    asset distribution (e.g. 0.99).  Empty groups are emitted with ``n = 0``
    and NaN statistics.
    """
    if not np.array_equal(panel_real.wave_years, panel_sim.wave_years):
        raise DomainError("panels cover different waves")
    genders = (0, 1) if by_gender else (None,)
    rows = []
    prepared = {}
    for label, panel in (("real", panel_real), ("sim", panel_sim)):
        assets = np.where(panel.alive == 1, panel.assets, np.nan)
        if trim_top is not None:
            for k in range(assets.shape[1]):
                col = assets[:, k]
                if np.any(~np.isnan(col)):
                    cut = np.nanquantile(col, trim_top)
                    col[col > cut] = np.nan
        prepared[label] = (cohort_of(panel.age), pi_quintile_of(panel.pi_rank), panel.gender, assets)
    for cohort in range(1, len(COHORTS) + 1):
        for q in range(1, 6):
            for g in genders:
                for k, year in enumerate(panel_real.wave_years):
                    row = {"cohort": cohort, "pi_quintile": q, "wave": int(year)}
                    if g is not None:
                        row["gender"] = g
                    for label in ("real", "sim"):
                        coh, qq, gen, assets = prepared[label]
                        sel = (coh == cohort) & (qq == q)
                        if g is not None:
                            sel &= gen == g
                        vals = assets[sel, k]
                        vals = vals[~np.isnan(vals)]
                        row[f"{label}_n"] = int(vals.size)
                        row[f"{label}_mean"] = float(vals.mean()) if vals.size else np.nan
                        row[f"{label}_median"] = float(np.median(vals)) if vals.size else np.nan
                    rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# dimension probe

BINARY_X2_COLUMNS = tuple(range(9, 14)) + tuple(range(14, 21))


def dimension_probe(features, dims, cfg: TrainConfig | None = None, hidden=()) -> list[dict]:
    """Autoencoder reconstruction error and per-column correlation by bottleneck size."""
    X = np.asarray(features, float)
    cfg = cfg or TrainConfig(optimizer="lbfgs", restarts=5)
    out = []
    for d in dims:
        if not 1 <= d <= X.shape[1]:
            raise DomainError(f"bottleneck {d} outside [1, {X.shape[1]}]")
        fit = train_autoencoder(X, d, cfg, hidden)
        out.append({"d": int(d), "mse": fit.mse, "correlation": fit.correlation.tolist(),
                    "mean_correlation": float(np.mean(fit.correlation))})
    return out


__all__ = [
    "BootstrapResult", "MonteCarloResult", "CounterfactualTable", "Economy", "bootstrap",
    "monte_carlo", "counterfactual", "fit_profiles", "dimension_probe", "summarize",
    "quadratic_fit", "pooled_loss_points", "pi_quintiles", "assets_before_death", "cohort_of",
    "pi_quintile_of", "synthetic_real_panel", "build_problem", "BINARY_X2_COLUMNS", "WAVE_YEARS",
]
