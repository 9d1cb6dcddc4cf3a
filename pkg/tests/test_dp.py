import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from advest.dp import (
    bellman_step,
    discretize_ar1,
    government_transfer,
    make_grid,
    solve_policy,
    stationary_distribution,
)
from advest.params import DomainError, FiscalParams, PreferenceParams

from conftest import flat_processes


class TestRouwenhorst:
    def test_single_node(self):
        z, p = discretize_ar1(0.0, 1.0, 1)
        assert z.tolist() == [0.0] and p.tolist() == [[1.0]]

    def test_stationary_variance(self):
        z, p = discretize_ar1(0.9, 1.0, 9)
        # power iteration is independent of the eigen-solver used in the package
        dist = np.full(9, 1 / 9)
        for _ in range(20_000):
            dist = dist @ p
        assert dist @ z ** 2 == pytest.approx(1 / (1 - 0.81), rel=1e-9)
        assert np.allclose(p.sum(axis=1), 1.0, atol=1e-12)
        assert stationary_distribution(p) == pytest.approx(dist, abs=1e-10)

    def test_autocorrelation(self):
        z, p = discretize_ar1(0.7, 0.3, 7)
        dist = stationary_distribution(p)
        cov1 = dist @ (z * (p @ z))
        assert cov1 / (dist @ z ** 2) == pytest.approx(0.7, rel=1e-10)

    def test_degenerate(self):
        z, p = discretize_ar1(0.5, 0.0, 5)
        assert np.all(z == 0.0)
        assert np.allclose(p.sum(axis=1), 1.0)

    def test_zero_nodes(self):
        with pytest.raises(DomainError):
            discretize_ar1(0.5, 1.0, 0)


class TestTransfer:
    fiscal = FiscalParams(c_floor=4_500.0)

    def test_slack(self):
        assert government_transfer(10_000.0, 1_000.0, self.fiscal) == 0.0

    def test_tops_up_resources(self):
        assert government_transfer(1_000.0, 0.0, self.fiscal) == 3_500.0

    def test_covers_medical(self):
        assert government_transfer(0.0, 2_000.0, self.fiscal) == 6_500.0


def _deterministic_economy(nu, beta, r, income=0.0, t_min=70, n_cash=200, survival=1.0):
    procs = flat_processes(t_min=t_min, income=income, survival=survival)
    fiscal = FiscalParams(c_floor=1.0)
    grid = make_grid(procs, fiscal, n_cash=n_cash, cash_max=2_000_000.0)
    params = PreferenceParams(nu, 1.0, 1.0, beta=beta, r=r)
    return params, fiscal, procs, grid


def _simulate_deterministic(sol, x0, r, income=0.0):
    grid = sol.grid
    xs, cs = [], []
    x = x0
    for it in range(len(grid.ages)):
        c = np.interp(x, grid.cash_grid, sol.consumption[it, 0, 1, 0, 0])
        xs.append(x)
        cs.append(c)
        x = (x - c) * (1 + r) + income
    return np.array(xs), np.array(cs)


class TestBellman:
    def test_two_periods_equal_split(self):
        params, fiscal, procs, grid = _deterministic_economy(2.0, 1.0, 0.0, t_min=98)
        sol = solve_policy(params, fiscal, procs, grid)
        c = sol.consumption[1, 0, 1, 0, 0]  # age 99, two periods to go
        interior = (grid.cash_grid > 100) & (grid.cash_grid < 1e6)
        assert c[interior] == pytest.approx(grid.cash_grid[interior] / 2, rel=1e-6)

    def test_terminal_without_bequest_consumes_everything(self, synthetic):
        procs, fiscal, grid = synthetic
        params = PreferenceParams(3.8, 1.0, 10_000.0)
        _, cons = bellman_step(None, 100, params, fiscal, procs, grid)
        assert np.array_equal(cons, np.broadcast_to(grid.cash_grid, cons.shape))

    def test_terminal_slope_matches_mpc(self, synthetic):
        procs, fiscal, grid = synthetic
        params = PreferenceParams(3.8, 0.25, 10_000.0)
        _, cons = bellman_step(None, 100, params, fiscal, procs, grid)

        def one_period(x):
            def neg(c):
                return -(c ** (1 - params.nu) / (1 - params.nu) + params.beta * params.theta_intensity
                         * (x - c + params.k_curv) ** (1 - params.nu) / (1 - params.nu))
            return minimize_scalar(neg, bounds=(fiscal.c_floor, x), method="bounded",
                                   options={"xatol": 1e-8}).x

        for x in (60_000.0, 150_000.0, 400_000.0):
            oracle_slope = (one_period(x + 50.0) - one_period(x - 50.0)) / 100.0
            slope = np.interp(x + 50, grid.cash_grid, cons[0, 1, 3, 2]) - np.interp(x - 50, grid.cash_grid, cons[0, 1, 3, 2])
            assert slope / 100.0 == pytest.approx(oracle_slope, abs=1e-3)
            assert oracle_slope == pytest.approx(params.mpc, abs=0.01)

    def test_requires_continuation(self, synthetic):
        procs, fiscal, grid = synthetic
        with pytest.raises(DomainError):
            bellman_step(None, 90, PreferenceParams(3.8, 0.25, 10_000.0), fiscal, procs, grid)


class TestSolve:
    @pytest.mark.parametrize("nu", [2.0, 3.8])
    def test_euler_closed_form(self, nu):
        beta, r = 0.96, 0.02
        params, fiscal, procs, grid = _deterministic_economy(nu, beta, r)
        sol = solve_policy(params, fiscal, procs, grid)
        xs, cs = _simulate_deterministic(sol, 500_000.0, r)
        growth = (beta * (1 + r)) ** (1 / nu)
        ratio = cs[1:] / cs[:-1]
        assert np.max(np.abs(ratio / growth - 1)) < 0.005
        assert cs[-1] == pytest.approx(xs[-1])

    def test_euler_with_income_unconstrained_periods(self):
        beta, r, y = 0.96, 0.02, 12_000.0
        params, fiscal, procs, grid = _deterministic_economy(3.0, beta, r, income=y)
        sol = solve_policy(params, fiscal, procs, grid)
        xs, cs = _simulate_deterministic(sol, 400_000.0, r, income=y)
        growth = (beta * (1 + r)) ** (1 / 3.0)
        saving = xs - cs
        ok = (saving[:-1] > 1_000.0)
        ratio = cs[1:] / cs[:-1]
        assert ok.sum() > 10
        assert np.max(np.abs(ratio[ok] / growth - 1)) < 0.005

    def test_feasibility_and_value_monotone(self, synthetic, truth_solution):
        procs, fiscal, grid = synthetic
        _, sol = truth_solution
        c = sol.consumption
        assert np.all(c >= fiscal.c_floor - 1e-9)
        assert np.all(c <= grid.cash_grid + 1e-9)
        assert np.all(np.diff(sol.value, axis=-1) >= 0)

    def test_savings_policy_monotone(self, truth_solution):
        _, sol = truth_solution
        savings = sol.grid.cash_grid - sol.consumption
        assert np.all(np.diff(savings, axis=-1) >= -1e-6 * sol.grid.cash_grid[1:])

    def test_consumption_monotone_when_floor_never_binds(self, synthetic):
        # with large deterministic medical bills the means-tested floor makes the
        # continuation value non-concave and consumption can fall with cash
        procs, fiscal, grid = synthetic
        procs = procs.replace(med_loc=np.full_like(procs.med_loc, -50.0)).without_medical_risk()
        params = PreferenceParams(3.8, 0.25, 10_000.0)
        sol = solve_policy(params, fiscal, procs, grid)
        c = sol.consumption
        assert np.all(np.diff(c, axis=-1) >= -1e-6 * c[..., 1:])

    def test_value_weakly_increasing_in_health_when_health_only_moves_costs(self):
        procs = flat_processes(survival=0.9, healthy=0.7, n_pi=2)
        med = procs.med_loc.copy()
        med[:, 0] = 8.5
        med[:, 1] = 7.5
        procs = procs.replace(med_loc=med, med_scale=np.full_like(med, 0.5), sigma_xi=0.5)
        fiscal = FiscalParams()
        grid = make_grid(procs, fiscal, n_cash=80)
        sol = solve_policy(PreferenceParams(3.0, 0.4, 5_000.0), fiscal, procs, grid)
        assert np.all(sol.value[:, :, 1] >= sol.value[:, :, 0] - 1e-12 * np.abs(sol.value[:, :, 0]))

    def test_deterministic(self, synthetic, truth_solution):
        procs, fiscal, grid = synthetic
        params, sol = truth_solution
        again = solve_policy(params, fiscal, procs, grid)
        assert np.array_equal(again.consumption, sol.consumption)
        assert np.array_equal(again.value, sol.value)
        assert again.params_hash == sol.params_hash

    def test_cache_round_trip(self, tmp_path, truth_solution):
        _, sol = truth_solution
        path = tmp_path / "policy.npz"
        sol.save(path)
        loaded = type(sol).load(path, sol.grid)
        assert np.array_equal(loaded.consumption, sol.consumption)
        assert loaded.params_hash == sol.params_hash
