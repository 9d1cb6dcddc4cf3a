"""Panel simulation from a solved policy, feature construction and augmentation.

Individuals are followed year by year from their 1996 age to 2006 and
recorded every two years.  Within a year the order of events is:

1. medical expenses realize and cash-on-hand (including any transfer) forms;
2. consumption follows the policy, the remainder is saved;
3. survival to next year realizes (depends on this year's health);
4. next year's health and persistent medical shock realize.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .calibration import InitialDistribution
from .dp import ExogenousProcesses, PolicySolution, _net_income
from .params import DEFAULT_R, DomainError, FiscalParams

log = logging.getLogger(__name__)

FIRST_YEAR = 1996
LAST_YEAR = 2006
WAVE_YEARS = np.arange(FIRST_YEAR, LAST_YEAR + 1, 2)
N_YEARS = LAST_YEAR - FIRST_YEAR + 1
PANEL_HEADER = ("id", "wave_year", "age", "gender", "pi_rank", "assets", "income",
                "medical", "health", "alive")
FEATURE_COLUMNS = {
    "X1": (["const", "log_age_1996", "pi_rank"]
           + [f"assets_{y}" for y in WAVE_YEARS]
           + [f"alive_{y}" for y in WAVE_YEARS[1:]]),
}
FEATURE_COLUMNS["X2"] = FEATURE_COLUMNS["X1"] + ["gender"] + [f"health_{y}" for y in WAVE_YEARS]


class MalformedPanelError(ValueError):
    pass


@dataclass(frozen=True)
class ShockSet:
    """Common random numbers, indexed ``[individual, age - t_min]``.

    ``zeta0`` is a standard normal per individual that places the 1996
    persistent medical shock in the chain's stationary distribution.
    """

    u_health: np.ndarray
    u_survival: np.ndarray
    eps: np.ndarray
    xi: np.ndarray
    zeta0: np.ndarray
    seed: int
    t_min: int
    t_max: int

    @property
    def m(self) -> int:
        return self.u_health.shape[0]

    def take(self, idx) -> "ShockSet":
        idx = np.asarray(idx)
        return ShockSet(self.u_health[idx], self.u_survival[idx], self.eps[idx], self.xi[idx],
                        self.zeta0[idx], self.seed, self.t_min, self.t_max)


def draw_shocks(m: int, seed: int, t_min: int = 70, t_max: int = 100) -> ShockSet:
    """Draw the shocks for ``m`` individuals over every age in ``[t_min, t_max]``."""
    if m < 1:
        raise DomainError("population size must be at least 1")
    rng = np.random.default_rng(seed)
    n_ages = t_max - t_min + 1
    return ShockSet(
        u_health=rng.random((m, n_ages)),
        u_survival=rng.random((m, n_ages)),
        eps=rng.standard_normal((m, n_ages)),
        xi=rng.standard_normal((m, n_ages)),
        zeta0=rng.standard_normal(m),
        seed=seed, t_min=t_min, t_max=t_max,
    )


@dataclass(frozen=True)
class Initials:
    """1996 state of each individual: gender, PI rank, age, assets, health."""

    gender: np.ndarray
    pi_rank: np.ndarray
    age: np.ndarray
    assets: np.ndarray
    health: np.ndarray

    def __post_init__(self):
        n = len(self.gender)
        for name in ("pi_rank", "age", "assets", "health"):
            if len(getattr(self, name)) != n:
                raise DomainError("initial arrays must share a length")
        if np.any(self.assets < 0):
            raise DomainError("initial assets must be nonnegative")
        if np.any((self.pi_rank < 0) | (self.pi_rank > 1)):
            raise DomainError("PI rank must lie in [0, 1]")

    def __len__(self):
        return len(self.gender)

    def take(self, idx) -> "Initials":
        idx = np.asarray(idx)
        return Initials(self.gender[idx], self.pi_rank[idx], self.age[idx], self.assets[idx],
                        self.health[idx])

    def resample(self, m: int, seed: int) -> "Initials":
        """Draw ``m`` initial states with replacement."""
        rng = np.random.default_rng(seed)
        return self.take(rng.integers(0, len(self), m))


def draw_initials(m: int, seed: int, dist: InitialDistribution | None = None) -> Initials:
    """Sample a synthetic 1996 cross-section (used when no real panel is given)."""
    dist = dist or InitialDistribution()
    rng = np.random.default_rng(seed)
    pi_rank = (np.argsort(np.argsort(rng.random(m))) + 0.5) / m
    gender = (rng.random(m) < dist.male_share).astype(np.int64)
    age = dist.age_min + rng.geometric(dist.age_decay, m) - 1
    age = np.minimum(age, dist.age_max).astype(np.int64)
    p_healthy = 1 / (1 + np.exp(-(dist.healthy_logit0 + dist.healthy_logit_pi * (pi_rank - 0.5))))
    health = (rng.random(m) < p_healthy).astype(np.int64)
    zero = rng.random(m) < dist.zero_asset_p0 * (1 - pi_rank)
    median = dist.asset_median0 + dist.asset_median_pi * pi_rank
    assets = np.where(zero, 0.0, median * np.exp(dist.asset_log_sd * rng.standard_normal(m)))
    assets = np.minimum(assets, dist.asset_cap)
    return Initials(gender, pi_rank, age, assets, health)


@dataclass
class Panel:
    """Biyearly records, arrays shaped ``(individuals, waves)``.

    Dead individuals carry zeros for assets, income, medical and health.
    """

    gender: np.ndarray
    pi_rank: np.ndarray
    age: np.ndarray
    assets: np.ndarray
    income: np.ndarray
    medical: np.ndarray
    health: np.ndarray
    alive: np.ndarray
    real: bool = False
    wave_years: np.ndarray = field(default_factory=lambda: WAVE_YEARS.copy())

    def __len__(self):
        return len(self.gender)

    def initials(self) -> Initials:
        """The 1996 state, for simulating from the empirical cross-section."""
        return Initials(self.gender.copy(), self.pi_rank.copy(), self.age.copy(),
                        self.assets[:, 0].copy(), self.health[:, 0].copy())

    def take(self, idx) -> "Panel":
        idx = np.asarray(idx)
        return Panel(self.gender[idx], self.pi_rank[idx], self.age[idx], self.assets[idx],
                     self.income[idx], self.medical[idx], self.health[idx], self.alive[idx],
                     self.real, self.wave_years)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(PANEL_HEADER)
            for i in range(len(self)):
                for k, year in enumerate(self.wave_years):
                    w.writerow([i, int(year), int(self.age[i] + year - self.wave_years[0]),
                                int(self.gender[i]), repr(float(self.pi_rank[i])),
                                repr(float(self.assets[i, k])), repr(float(self.income[i, k])),
                                repr(float(self.medical[i, k])), int(self.health[i, k]),
                                int(self.alive[i, k])])

    @classmethod
    def from_csv(cls, path, real: bool = True) -> "Panel":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = tuple(next(reader))
            if header != PANEL_HEADER:
                raise MalformedPanelError(f"unexpected header {header}")
            rows = list(reader)
        ids = sorted({int(r[0]) for r in rows})
        pos = {pid: i for i, pid in enumerate(ids)}
        n, nw = len(ids), len(WAVE_YEARS)
        wave_pos = {int(y): k for k, y in enumerate(WAVE_YEARS)}
        seen = np.zeros((n, nw), bool)
        arr = {name: np.zeros((n, nw)) for name in ("assets", "income", "medical", "health", "alive")}
        gender = np.zeros(n, np.int64)
        pi_rank = np.zeros(n)
        age = np.zeros(n, np.int64)
        for r in rows:
            i = pos[int(r[0])]
            year = int(r[1])
            if year not in wave_pos:
                raise MalformedPanelError(f"unknown wave year {year}")
            k = wave_pos[year]
            seen[i, k] = True
            age[i] = int(r[2]) - (year - FIRST_YEAR)
            gender[i] = int(r[3])
            pi_rank[i] = float(r[4])
            for name, val in zip(("assets", "income", "medical", "health", "alive"), r[5:]):
                arr[name][i, k] = float(val)
        if not seen.all():
            raise MalformedPanelError("every individual needs a record for every wave")
        return cls(gender, pi_rank, age, arr["assets"], arr["income"], arr["medical"],
                   arr["health"].astype(np.int64), arr["alive"].astype(np.int64), real)


# ---------------------------------------------------------------------------
# simulation kernel

@njit(cache=True)
def _bracket(nodes, v):
    n = nodes.shape[0]
    if n == 1:
        return 0, 0.0
    if v <= nodes[0]:
        return 0, 0.0
    if v >= nodes[n - 1]:
        return n - 2, 1.0
    j = np.searchsorted(nodes, v) - 1
    return j, (v - nodes[j]) / (nodes[j + 1] - nodes[j])


@njit(cache=True)
def _lerp_pi(table, g, h, jp, wp, it):
    return (1.0 - wp) * table[g, h, jp, it] + wp * table[g, h, jp + 1, it]


@njit(cache=True)
def _consumption(cons, it, g, h, jp, wp, jz, wz, zeta_n, cash, x):
    out = 0.0
    for dp in range(2):
        wpp = wp if dp == 1 else 1.0 - wp
        if wpp == 0.0:
            continue
        for dz in range(2):
            if zeta_n == 1 and dz == 1:
                continue
            wzz = (wz if dz == 1 else 1.0 - wz) if zeta_n > 1 else 1.0
            if wzz == 0.0:
                continue
            row = cons[it, g, h, jp + dp, jz + dz]
            n = cash.shape[0]
            if x <= cash[0]:
                c = row[0]
            else:
                j = n - 2 if x >= cash[n - 1] else np.searchsorted(cash, x) - 1
                c = row[j] + (x - cash[j]) / (cash[j + 1] - cash[j]) * (row[j + 1] - row[j])
            out += wpp * wzz * c
    return out


@njit(cache=True)
def _simulate(cons, cash, zeta_nodes, pi_nodes, pi_h, pi_s, med_loc, med_scale, income, rho,
              sigma_xi, sigma_eps, zeta_sd, r, c_floor, thr, rates, interest_only, t_min, t_max,
              gender, pi_rank, age0, assets0, health0, u_h, u_s, eps, xi, zeta0, n_years):
    m = gender.shape[0]
    n_waves = (n_years + 1) // 2
    a_out = np.zeros((m, n_waves))
    y_out = np.zeros((m, n_waves))
    m_out = np.zeros((m, n_waves))
    h_out = np.zeros((m, n_waves), np.int64)
    s_out = np.zeros((m, n_waves), np.int64)
    nz = zeta_nodes.shape[0]
    for i in range(m):
        g = gender[i]
        h = health0[i]
        a = assets0[i]
        zeta = zeta_sd * zeta0[i]
        jp, wp = _bracket(pi_nodes, pi_rank[i])
        for year in range(n_years):
            t = age0[i] + year
            if t > t_max:
                break
            it = t - t_min
            y = (1.0 - wp) * income[g, jp, it] + wp * income[g, jp + 1, it]
            loc = _lerp_pi(med_loc, g, h, jp, wp, it)
            scale = _lerp_pi(med_scale, g, h, jp, wp, it)
            med = np.exp(loc + scale * (zeta + sigma_xi * xi[i, it]))
            x = a + _net_income(a, y, r, thr, rates, interest_only) - med
            if x < c_floor:
                x = c_floor
            if year % 2 == 0:
                k = year // 2
                a_out[i, k] = a
                y_out[i, k] = y
                m_out[i, k] = med
                h_out[i, k] = h
                s_out[i, k] = 1
            jz, wz = _bracket(zeta_nodes, zeta)
            c = _consumption(cons, it, g, h, jp, wp, jz, wz, nz, cash, x)
            if c > x:
                c = x
            if c < min(c_floor, x):
                c = min(c_floor, x)
            a = x - c
            if u_s[i, it] >= _lerp_pi(pi_s, g, h, jp, wp, it):
                break
            h = 1 if u_h[i, it] < _lerp_pi(pi_h, g, h, jp, wp, it) else 0
            zeta = rho * zeta + sigma_eps * eps[i, it]
    return a_out, y_out, m_out, h_out, s_out


def simulate_panel(policy: PolicySolution, procs: ExogenousProcesses, fiscal: FiscalParams,
                   shocks: ShockSet, initials: Initials, r: float = DEFAULT_R) -> Panel:
    """Simulate the 1996-2006 biyearly panel for ``initials`` under ``policy``.

    Health, PI and the persistent medical shock enter the policy by linear
    interpolation across their nodes.  Deterministic given ``shocks``.
    """
    grid = policy.grid
    if (grid.t_min, grid.t_max) != (procs.t_min, procs.t_max) or not np.array_equal(grid.pi_nodes, procs.pi_nodes):
        raise DomainError("policy was solved for different processes")
    if (shocks.t_min, shocks.t_max) != (procs.t_min, procs.t_max):
        raise DomainError("shock set covers a different age range")
    if shocks.m < len(initials):
        raise DomainError(f"shock set has {shocks.m} individuals, need {len(initials)}")
    age0 = np.asarray(initials.age, np.int64)
    if np.any(age0 < procs.t_min) or np.any(age0 > procs.t_max):
        raise DomainError(f"initial ages must lie in [{procs.t_min}, {procs.t_max}]")
    assets0 = np.asarray(initials.assets, float)
    ceiling = grid.cash_grid[-1]
    if np.any(assets0 > ceiling):
        log.warning("%d initial asset values above the grid ceiling %.0f were clamped",
                    int(np.sum(assets0 > ceiling)), ceiling)
        assets0 = np.minimum(assets0, ceiling)
    m = len(initials)
    thr, rates = fiscal.bracket_arrays()
    zeta_sd = procs.sigma_eps / np.sqrt(1 - procs.rho ** 2)
    a, y, med, h, s = _simulate(
        policy.consumption, grid.cash_grid, grid.zeta_nodes, grid.pi_nodes, procs.pi_h,
        procs.pi_s, procs.med_loc, procs.med_scale, procs.income, procs.rho, procs.sigma_xi,
        procs.sigma_eps, zeta_sd, r, fiscal.c_floor, thr, rates, fiscal.tax_base == "interest",
        procs.t_min, procs.t_max, np.asarray(initials.gender, np.int64),
        np.asarray(initials.pi_rank, float), age0, assets0,
        np.asarray(initials.health, np.int64), shocks.u_health[:m], shocks.u_survival[:m],
        shocks.eps[:m], shocks.xi[:m], shocks.zeta0[:m], N_YEARS,
    )
    return Panel(np.asarray(initials.gender, np.int64).copy(), np.asarray(initials.pi_rank, float).copy(),
                 age0.copy(), a, y, med, h, s, real=False)


# ---------------------------------------------------------------------------
# features

def build_features(panel: Panel, spec: str = "X1") -> np.ndarray:
    """Discriminator inputs, one row per individual.

    ``X1`` is (1, log age in 1996, PI rank, assets 1996..2006 in $1000s,
    alive 1998..2006); ``X2`` appends gender and health 1996..2006.
    """
    if spec not in FEATURE_COLUMNS:
        raise DomainError(f"unknown feature spec {spec!r}; use 'X1' or 'X2'")
    n_waves = len(WAVE_YEARS)
    for name in ("assets", "health", "alive"):
        arr = getattr(panel, name)
        if arr.ndim != 2 or arr.shape[1] != n_waves:
            raise MalformedPanelError(f"{name} must cover the {n_waves} waves 1996-2006")
        if np.any(np.isnan(arr)):
            raise MalformedPanelError(f"{name} has missing values")
    alive = (np.asarray(panel.alive) > 0).astype(float)
    # death padding: decedents carry zeros after their last wave alive
    alive = np.minimum.accumulate(alive, axis=1)
    n = len(panel)
    cols = [np.ones(n), np.log(np.asarray(panel.age, float)), np.asarray(panel.pi_rank, float)]
    cols += list((np.asarray(panel.assets, float) * alive / 1000.0).T)
    cols += list(alive[:, 1:].T)
    if spec == "X2":
        cols.append(np.asarray(panel.gender, float))
        cols += list((np.asarray(panel.health, float) * alive).T)
    return np.column_stack(cols)


def augment_real(real: np.ndarray, m: int, seed: int) -> np.ndarray:
    """Bring the real sample up to ``m`` rows by resampling rows with replacement.

    All original rows are kept and ``m - n`` resampled rows are appended, so
    every observation keeps at least unit weight and the expected multiplicity
    of each row is ``m / n``.
    """
    real = np.asarray(real, float)
    n = real.shape[0]
    if n == 0:
        raise DomainError("real sample is empty")
    if m < n:
        raise DomainError(f"target size {m} is below the real sample size {n}")
    rng = np.random.default_rng(seed)
    extra = rng.integers(0, n, m - n)
    return np.concatenate([real, real[extra]], axis=0)


def save_features(path, features: np.ndarray, spec: str) -> None:
    np.savetxt(path, features, delimiter=",", header=",".join(FEATURE_COLUMNS[spec]), comments="")


__all__ = [
    "ShockSet", "Initials", "Panel", "MalformedPanelError", "draw_shocks", "draw_initials",
    "simulate_panel", "build_features", "augment_real", "save_features", "FEATURE_COLUMNS",
    "WAVE_YEARS",
]
