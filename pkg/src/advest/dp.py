"""Finite-horizon dynamic program for retired singles, solved by backward induction.

State at age ``t``: cash-on-hand ``x`` (continuous, on an exponentially spaced
grid), gender ``g``, health ``h``, permanent-income node ``I`` and the
persistent medical shock ``zeta`` (Rouwenhorst chain).  Value functions are
stored and interpolated in the inverse-utility ("consumption equivalent")
transform ``((1 - nu) V) ** (1 / (1 - nu))``, which is linear in ``x`` for
CRRA problems and keeps linear interpolation accurate near the floor.
"""
from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numba import njit

from .params import DomainError, FiscalParams, PreferenceParams

log = logging.getLogger(__name__)

T_MIN = 70
T_MAX = 100


def discretize_ar1(rho: float, sigma_eps: float, n_nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Rouwenhorst discretization of ``z' = rho z + eps``, ``eps ~ N(0, sigma_eps^2)``.

    The chain's stationary variance equals ``sigma_eps^2 / (1 - rho^2)``
    exactly, as does its first-order autocorrelation.
    """
    if n_nodes < 1:
        raise DomainError("n_nodes must be at least 1")
    if not abs(rho) < 1:
        raise DomainError("|rho| must be below 1")
    if sigma_eps < 0:
        raise DomainError("sigma_eps must be nonnegative")
    if n_nodes == 1:
        return np.zeros(1), np.ones((1, 1))

    p = (1.0 + rho) / 2.0
    trans = np.array([[p, 1 - p], [1 - p, p]])
    for n in range(3, n_nodes + 1):
        big = np.zeros((n, n))
        big[:-1, :-1] += p * trans
        big[:-1, 1:] += (1 - p) * trans
        big[1:, :-1] += (1 - p) * trans
        big[1:, 1:] += p * trans
        big[1:-1] /= 2.0
        trans = big
    sigma_z = sigma_eps / np.sqrt(1.0 - rho ** 2)
    psi = sigma_z * np.sqrt(n_nodes - 1)
    nodes = np.linspace(-psi, psi, n_nodes)
    return nodes, trans


def stationary_distribution(trans: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eig(trans.T)
    v = np.real(vecs[:, np.argmin(np.abs(vals - 1.0))])
    return v / v.sum()


def government_transfer(resources, med, fiscal: FiscalParams):
    """Means-tested transfer ``max(0, c_floor - (resources - med))``."""
    out = np.maximum(0.0, fiscal.c_floor - (np.asarray(resources, float) - np.asarray(med, float)))
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class ExogenousProcesses:
    """Health, survival, medical-expense and income tables.

    Probability and medical tables have shape ``(2, 2, n_pi, n_ages)`` indexed
    ``[g, h, pi_node, t - t_min]``; ``income`` has shape ``(2, n_pi, n_ages)``.
    ``pi_h`` is the probability of being healthy next period, ``pi_s`` the
    probability of surviving to next period.
    """

    pi_h: np.ndarray
    pi_s: np.ndarray
    med_loc: np.ndarray
    med_scale: np.ndarray
    income: np.ndarray
    rho: float
    sigma_xi: float
    sigma_eps: float
    pi_nodes: np.ndarray
    t_min: int = T_MIN
    t_max: int = T_MAX
    label: str = ""

    def __post_init__(self):
        for name in ("pi_h", "pi_s", "med_loc", "med_scale", "income", "pi_nodes"):
            arr = np.ascontiguousarray(np.asarray(getattr(self, name), dtype=float))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        n_pi, n_ages = len(self.pi_nodes), self.t_max - self.t_min + 1
        shape = (2, 2, n_pi, n_ages)
        for name in ("pi_h", "pi_s", "med_loc", "med_scale"):
            if getattr(self, name).shape != shape:
                raise DomainError(f"{name} must have shape {shape}, got {getattr(self, name).shape}")
        if self.income.shape != (2, n_pi, n_ages):
            raise DomainError(f"income must have shape {(2, n_pi, n_ages)}")
        for name in ("pi_h", "pi_s"):
            arr = getattr(self, name)
            if np.any((arr < 0) | (arr > 1)):
                raise DomainError(f"{name} must lie in [0, 1]")
        if np.any(self.pi_s[..., -1] != 0):
            raise DomainError("pi_s must be 0 at t_max (death is certain at the last age)")
        if np.any(self.med_scale < 0):
            raise DomainError("med_scale must be nonnegative")
        if not abs(self.rho) < 1:
            raise DomainError("|rho| must be below 1")
        if self.sigma_xi < 0 or self.sigma_eps < 0:
            raise DomainError("shock standard deviations must be nonnegative")
        if n_pi < 2 or np.any(np.diff(self.pi_nodes) <= 0):
            raise DomainError("pi_nodes must be strictly increasing with at least 2 nodes")

    @property
    def ages(self) -> np.ndarray:
        return np.arange(self.t_min, self.t_max + 1)

    def replace(self, **changes) -> "ExogenousProcesses":
        fields = {k: getattr(self, k) for k in self.__dataclass_fields__}
        fields.update(changes)
        return ExogenousProcesses(**fields)

    def without_medical_risk(self) -> "ExogenousProcesses":
        """Counterfactual with ``sigma == 0`` so that ``log m = m(g, h, I, t)``."""
        return self.replace(med_scale=np.zeros_like(self.med_scale))

    def to_dict(self) -> dict:
        return {
            "label": self.label, "t_min": self.t_min, "t_max": self.t_max,
            "rho": self.rho, "sigma_xi": self.sigma_xi, "sigma_eps": self.sigma_eps,
            "pi_nodes": self.pi_nodes.tolist(),
            "pi_h": self.pi_h.tolist(), "pi_s": self.pi_s.tolist(),
            "med_loc": self.med_loc.tolist(), "med_scale": self.med_scale.tolist(),
            "income": self.income.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExogenousProcesses":
        keys = ("pi_h", "pi_s", "med_loc", "med_scale", "income", "rho", "sigma_xi",
                "sigma_eps", "pi_nodes", "t_min", "t_max", "label")
        return cls(**{k: d[k] for k in keys if k in d})

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "ExogenousProcesses":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()


@dataclass(frozen=True)
class StateGrid:
    cash_grid: np.ndarray
    sav_grid: np.ndarray
    zeta_nodes: np.ndarray
    zeta_trans: np.ndarray
    quad_nodes: np.ndarray
    quad_weights: np.ndarray
    pi_nodes: np.ndarray
    t_min: int
    t_max: int
    med_cap: float

    def __post_init__(self):
        if self.cash_grid[0] < 0 or np.any(np.diff(self.cash_grid) <= 0):
            raise DomainError("cash grid must be nonnegative and strictly increasing")
        if len(self.cash_grid) < 2:
            raise DomainError("cash grid needs at least 2 nodes")
        if not np.allclose(self.zeta_trans.sum(axis=1), 1.0, atol=1e-12, rtol=0):
            raise DomainError("zeta transition rows must sum to 1")

    @property
    def ages(self) -> np.ndarray:
        return np.arange(self.t_min, self.t_max + 1)

    def settings(self) -> dict:
        return {
            "n_cash": len(self.cash_grid), "cash_min": float(self.cash_grid[0]),
            "cash_max": float(self.cash_grid[-1]), "n_zeta": len(self.zeta_nodes),
            "n_quad": len(self.quad_nodes), "med_cap": self.med_cap,
            "cash_grid_digest": hashlib.sha256(self.cash_grid.tobytes()).hexdigest()[:16],
        }


def make_grid(procs: ExogenousProcesses, fiscal: FiscalParams, n_cash: int = 200,
              cash_max: float = 2_000_000.0, n_zeta: int = 5, n_quad: int = 5,
              spacing_shift: float = 1_000.0, med_cap: float = 2_000_000.0) -> StateGrid:
    """Build the state grid.

    Cash-on-hand never falls below the consumption floor (the transfer tops it
    up), so the grid runs from ``c_floor`` to ``cash_max`` with gaps growing
    geometrically: ``x = c_floor + geomspace(shift, span + shift) - shift``.
    """
    if n_cash < 2:
        raise DomainError("n_cash must be at least 2")
    span = cash_max - fiscal.c_floor
    if span <= 0:
        raise DomainError("cash_max must exceed the consumption floor")
    cash = fiscal.c_floor + np.geomspace(spacing_shift, span + spacing_shift, n_cash) - spacing_shift
    cash[0] = fiscal.c_floor
    cash[-1] = cash_max
    zeta, ztrans = discretize_ar1(procs.rho, procs.sigma_eps, n_zeta)
    herm_x, herm_w = np.polynomial.hermite_e.hermegauss(n_quad)
    return StateGrid(
        cash_grid=cash, sav_grid=cash - fiscal.c_floor, zeta_nodes=zeta, zeta_trans=ztrans,
        quad_nodes=herm_x, quad_weights=herm_w / herm_w.sum(), pi_nodes=procs.pi_nodes.copy(),
        t_min=procs.t_min, t_max=procs.t_max, med_cap=med_cap,
    )


@dataclass(frozen=True)
class PolicySolution:
    """Consumption and value on the grid, shaped ``(age, g, h, pi, zeta, cash)``."""

    consumption: np.ndarray
    value: np.ndarray
    grid: StateGrid
    params_hash: str
    nu: float

    def policy_at(self, t: int) -> np.ndarray:
        return self.consumption[t - self.grid.t_min]

    def save(self, path) -> None:
        np.savez(path, consumption=self.consumption, value=self.value,
                 params_hash=np.array(self.params_hash), nu=np.array(self.nu))

    @classmethod
    def load(cls, path, grid: StateGrid) -> "PolicySolution":
        with np.load(path) as z:
            return cls(z["consumption"], z["value"], grid, str(z["params_hash"]), float(z["nu"]))


def solution_hash(params: PreferenceParams, fiscal: FiscalParams, procs: ExogenousProcesses,
                  grid: StateGrid) -> str:
    blob = json.dumps({
        "params": params.to_dict(), "fiscal": fiscal.to_dict(),
        "procs": procs.digest(), "grid": grid.settings(),
    }, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()


# ---------------------------------------------------------------------------
# numba kernels

@njit(cache=True)
def _interp(grid, vals, x):
    n = grid.shape[0]
    if x <= grid[0]:
        j = 0
    elif x >= grid[n - 1]:
        j = n - 2
    else:
        j = np.searchsorted(grid, x) - 1
    w = (x - grid[j]) / (grid[j + 1] - grid[j])
    return vals[j] + w * (vals[j + 1] - vals[j])


@njit(cache=True)
def _after_tax(gross, thr, rates):
    tax = 0.0
    nb = thr.shape[0]
    for b in range(nb):
        if gross <= thr[b]:
            break
        top = thr[b + 1] if b + 1 < nb else np.inf
        tax += rates[b] * (min(gross, top) - thr[b])
    return gross - tax


@njit(cache=True)
def _net_income(a, y, r, thr, rates, interest_only):
    if interest_only:
        return _after_tax(r * a, thr, rates) + y
    return _after_tax(r * a + y, thr, rates)


@njit(cache=True)
def _estate(e, tilde_tau, tilde_x):
    return e - max(0.0, tilde_tau * (e - tilde_x))


@njit(cache=True)
def _to_ce(v, nu):
    return ((1.0 - nu) * v) ** (1.0 / (1.0 - nu))


@njit(cache=True)
def _from_ce(w, nu):
    if w <= 1e-300:
        w = 1e-300
    return w ** (1.0 - nu) / (1.0 - nu)


@njit(cache=True)
def _segment_foc(x, a0, a1, l0, l1, nu):
    """Maximizer of ``u(x - a) + from_ce(L(a))`` on ``[a0, a1]`` for linear ``L``.

    Both terms are concave on the segment, so the first-order condition
    ``(x - a) = slope**(-1/nu) * L(a)`` pins the interior optimum; otherwise
    the better endpoint wins.
    """
    slope = (l1 - l0) / (a1 - a0)
    if slope <= 0.0:
        return a0
    kappa = slope ** (-1.0 / nu)
    a = (x - kappa * l0 + kappa * slope * a0) / (1.0 + kappa * slope)
    if a < a0:
        return a0
    if a > a1:
        return a1
    return a


@njit(cache=True)
def _utility_matrix(cash, sav, nu):
    n = cash.shape[0]
    u = np.full((n, n), -np.inf)
    for i in range(n):
        for j in range(i + 1):
            c = cash[i] - sav[j]
            u[i, j] = c ** (1.0 - nu) / (1.0 - nu)
    return u


@njit(cache=True)
def _optimize_row(cash, sav, umat, bce, nu, cons_out, vce_out):
    """Choose savings for every cash node given the CE-transformed continuation ``bce``.

    Savings node ``j`` is feasible at cash node ``i`` iff ``j <= i`` (the grids
    differ by the consumption floor).  A global scan over feasible nodes is
    refined by exact segment-wise maximization around the best node.
    """
    n = cash.shape[0]
    b = np.empty(n)
    for j in range(n):
        b[j] = _from_ce(bce[j], nu)
    start = 0
    for i in range(n):
        x = cash[i]
        # u(x_i - s_j) has increasing differences in (i, j), so the largest
        # maximizer is nondecreasing in i and the scan can start at the last one
        best_j = start
        best_v = -np.inf
        for j in range(start, i + 1):
            v = umat[i, j] + b[j]
            if v >= best_v:
                best_v = v
                best_j = j
        start = best_j
        best_a = sav[best_j]
        for side in range(2):
            j0 = best_j - 1 + side
            j1 = j0 + 1
            if j0 < 0 or j1 > i:
                continue
            a = _segment_foc(x, sav[j0], sav[j1], bce[j0], bce[j1], nu)
            c = x - a
            if c <= 0.0:
                continue
            w = (a - sav[j0]) / (sav[j1] - sav[j0])
            v = c ** (1.0 - nu) / (1.0 - nu) + _from_ce(bce[j0] + w * (bce[j1] - bce[j0]), nu)
            if v > best_v:
                best_v = v
                best_a = a
        cons_out[i] = x - best_a
        vce_out[i] = _to_ce(best_v, nu)


@njit(cache=True)
def _expected_continuation(vce_next, it, cash, sav, zeta, ztrans, qx, qw, pi_h, med_loc, med_scale,
                           income, sigma_xi, r, c_floor, thr, rates, interest_only, log_cap, nu):
    """Expected next-period value as a function of savings, in CE transform.

    Returns ``wce[g, h, pi, zeta, a']``.
    """
    n_pi = vce_next.shape[2]
    nz = zeta.shape[0]
    na = sav.shape[0]
    nx = cash.shape[0]
    nq = qx.shape[0]
    # Q[g, pi, h', z', a']: value after next period's shocks, integrated over xi
    q = np.zeros((2, n_pi, 2, nz, na))
    for g in range(2):
        for ip in range(n_pi):
            y1 = income[g, ip, it + 1]
            for h1 in range(2):
                loc = med_loc[g, h1, ip, it + 1]
                scale = med_scale[g, h1, ip, it + 1]
                for z1 in range(nz):
                    vrow = vce_next[g, h1, ip, z1]
                    for iq in range(nq):
                        lm = loc + scale * (zeta[z1] + sigma_xi * qx[iq])
                        if lm > log_cap:
                            lm = log_cap
                        med = np.exp(lm)
                        wq = qw[iq]
                        # x' is nondecreasing in savings: walk the bracket index
                        j = 0
                        for ia in range(na):
                            a = sav[ia]
                            x1 = a + _net_income(a, y1, r, thr, rates, interest_only) - med
                            if x1 < c_floor:
                                x1 = c_floor
                            while j < nx - 2 and x1 > cash[j + 1]:
                                j += 1
                            wgt = (x1 - cash[j]) / (cash[j + 1] - cash[j])
                            vce1 = vrow[j] + wgt * (vrow[j + 1] - vrow[j])
                            q[g, ip, h1, z1, ia] += wq * _from_ce(vce1, nu)
    wce = np.empty((2, 2, n_pi, nz, na))
    for g in range(2):
        for h in range(2):
            for ip in range(n_pi):
                ph = pi_h[g, h, ip, it]
                for z in range(nz):
                    for ia in range(na):
                        acc = 0.0
                        for z1 in range(nz):
                            pz = ztrans[z, z1]
                            if pz == 0.0:
                                continue
                            acc += pz * (ph * q[g, ip, 1, z1, ia] + (1.0 - ph) * q[g, ip, 0, z1, ia])
                        wce[g, h, ip, z, ia] = _to_ce(acc, nu)
    return wce


@njit(cache=True)
def _optimize_age(wce, it, cash, sav, umat, pi_s, nu, beta, theta, k, tilde_tau, tilde_x, n_pi, nz):
    nx = cash.shape[0]
    cons = np.empty((2, 2, n_pi, nz, nx))
    vce = np.empty((2, 2, n_pi, nz, nx))
    bce = np.empty(nx)
    for g in range(2):
        for h in range(2):
            for ip in range(n_pi):
                ps = pi_s[g, h, ip, it]
                if ps == 0.0 and theta == 0.0:
                    # nothing to save for: consume everything
                    for z in range(nz):
                        for ix in range(nx):
                            cons[g, h, ip, z, ix] = cash[ix]
                            vce[g, h, ip, z, ix] = cash[ix]
                    continue
                for z in range(nz):
                    for j in range(nx):
                        acc = 0.0
                        if ps > 0.0:
                            acc += ps * _from_ce(wce[g, h, ip, z, j], nu)
                        if ps < 1.0 and theta > 0.0:
                            e = _estate(sav[j], tilde_tau, tilde_x)
                            acc += (1.0 - ps) * theta * (e + k) ** (1.0 - nu) / (1.0 - nu)
                        bce[j] = _to_ce(beta * acc, nu)
                    _optimize_row(cash, sav, umat, bce, nu, cons[g, h, ip, z], vce[g, h, ip, z])
    return cons, vce


def _kernel_args(fiscal: FiscalParams):
    thr, rates = fiscal.bracket_arrays()
    return thr, rates, fiscal.tax_base == "interest"


def _continuation(vce_next, it, params, fiscal, procs, grid, thr, rates, interest_only):
    return _expected_continuation(
        vce_next, it, grid.cash_grid, grid.sav_grid, grid.zeta_nodes, grid.zeta_trans,
        grid.quad_nodes, grid.quad_weights, procs.pi_h, procs.med_loc, procs.med_scale,
        procs.income, procs.sigma_xi, params.r, fiscal.c_floor, thr, rates, interest_only,
        np.log(grid.med_cap), params.nu,
    )


def _optimize(wce, it, params, fiscal, procs, grid, umat):
    return _optimize_age(
        wce, it, grid.cash_grid, grid.sav_grid, umat, procs.pi_s, params.nu, params.beta,
        params.theta_intensity, params.k_curv, fiscal.tilde_tau, fiscal.tilde_x,
        len(grid.pi_nodes), len(grid.zeta_nodes),
    )


def bellman_step(v_next, t: int, params: PreferenceParams, fiscal: FiscalParams,
                 procs: ExogenousProcesses, grid: StateGrid) -> tuple[np.ndarray, np.ndarray]:
    """One backward-induction step at age ``t``.

    ``v_next`` is the value at ``t + 1`` shaped ``(g, h, pi, zeta, cash)``; it
    may be ``None`` when survival past ``t`` is impossible.  Returns the value
    and consumption at ``t`` on the same layout.
    """
    it = t - grid.t_min
    thr, rates, interest_only = _kernel_args(fiscal)
    n_pi, nz, na = len(grid.pi_nodes), len(grid.zeta_nodes), len(grid.sav_grid)
    if v_next is None:
        if np.any(procs.pi_s[..., it] > 0):
            raise DomainError(f"continuation value required at age {t}")
        wce = np.ones((2, 2, n_pi, nz, na))
    else:
        vce_next = ((1.0 - params.nu) * np.asarray(v_next, float)) ** (1.0 / (1.0 - params.nu))
        wce = _continuation(vce_next, it, params, fiscal, procs, grid, thr, rates, interest_only)
    umat = _utility_matrix(grid.cash_grid, grid.sav_grid, params.nu)
    cons, vce = _optimize(wce, it, params, fiscal, procs, grid, umat)
    return vce ** (1.0 - params.nu) / (1.0 - params.nu), cons


def solve_policy(params: PreferenceParams, fiscal: FiscalParams, procs: ExogenousProcesses,
                 grid: StateGrid) -> PolicySolution:
    """Backward induction from ``t_max`` to ``t_min``."""
    if (grid.t_min, grid.t_max) != (procs.t_min, procs.t_max):
        raise DomainError("grid and processes disagree on the age range")
    if not np.array_equal(grid.pi_nodes, procs.pi_nodes):
        raise DomainError("grid and processes disagree on the PI nodes")
    if not np.allclose(grid.sav_grid, grid.cash_grid - fiscal.c_floor, rtol=0, atol=1e-6):
        raise DomainError("grid was built for a different consumption floor")
    thr, rates, interest_only = _kernel_args(fiscal)
    n_ages = grid.t_max - grid.t_min + 1
    n_pi, nz, nx = len(grid.pi_nodes), len(grid.zeta_nodes), len(grid.cash_grid)
    umat = _utility_matrix(grid.cash_grid, grid.sav_grid, params.nu)
    cons = np.empty((n_ages, 2, 2, n_pi, nz, nx))
    vce = np.empty_like(cons)
    wce = np.ones((2, 2, n_pi, nz, len(grid.sav_grid)))
    for it in range(n_ages - 1, -1, -1):
        if it < n_ages - 1:
            wce = _continuation(vce[it + 1], it, params, fiscal, procs, grid, thr, rates, interest_only)
        cons[it], vce[it] = _optimize(wce, it, params, fiscal, procs, grid, umat)
    value = vce ** (1.0 - params.nu) / (1.0 - params.nu)
    return PolicySolution(cons, value, grid, solution_hash(params, fiscal, procs, grid), params.nu)
