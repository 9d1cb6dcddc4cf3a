"""Acceptance suite: one test class per criterion.

Each criterion's pass/fail line is printed in the terminal summary (see the
``criterion`` marker hook in conftest).  The Monte Carlo criteria (7 and 8)
share one desk-scale experiment that takes on the order of an hour on a
single core.
"""
import math

import numpy as np
import pytest
from scipy.special import expit

from advest.adversarial import AdversarialProblem, EstimationConfig, GaussianLocationSimulator, StructuralSimulator, estimate
from advest.dp import make_grid, solve_policy
from advest.inference import Economy, bootstrap, counterfactual, monte_carlo, pooled_loss_points, quadratic_fit
from advest.nn import (
    LOSS_AT_HALF,
    Network,
    NetworkArch,
    TrainConfig,
    autoencoder_arch,
    cross_entropy,
    forward,
    gradient_check,
    train_autoencoder,
    train_discriminator,
    zero_network,
)
from advest.params import FiscalParams, PreferenceParams
from advest.sim import draw_initials, draw_shocks

from conftest import flat_processes

TRUTH = PreferenceParams(3.8, 0.25, 10_000.0, beta=0.971, r=0.02)
LBFGS = TrainConfig(optimizer="lbfgs")

# published reference values
REFERENCE_ASSET_FLOOR = 3_266.0
REFERENCE_BAND_95 = {"nu": (3.356, 4.194), "mpc": (0.192, 0.307), "k_curv": (6_250.0, 14_970.0)}
REFERENCE_PROBE_CORRELATION_D4 = 0.945  # reference only, requires the restricted survey panel


def report(n, text):
    print(f"criterion {n}: {text}")


@pytest.mark.criterion(1, "asset floor implied by (3.8, 0.25, 10k) within 0.2% of $3,266")
def test_criterion_01_asset_floor():
    floor = TRUTH.asset_floor
    rel = abs(floor / REFERENCE_ASSET_FLOOR - 1)
    report(1, f"asset floor {floor:.2f}, relative gap {rel:.5f}")
    assert rel <= 0.002


@pytest.mark.criterion(2, "cross-entropy at D = 1/2 equals 2 log(1/2)")
def test_criterion_02_loss_bound():
    rng = np.random.default_rng(0)
    net = zero_network(NetworkArch.discriminator(3))
    loss = cross_entropy(net, rng.normal(size=(50, 3)), rng.normal(size=(70, 3)))
    report(2, f"loss {loss:.12f}")
    assert abs(loss - 2 * math.log(0.5)) <= 1e-9
    assert loss == pytest.approx(-1.386294, abs=5e-7)
    assert LOSS_AT_HALF == pytest.approx(loss, abs=1e-12)


@pytest.mark.criterion(3, "discriminator matches the analytic optimum on N(0,1) vs N(1,1)")
class TestCriterion03DiscriminatorOracle:
    n = 20_000

    def test_pointwise_optimum(self):
        rng = np.random.default_rng(3)
        real = rng.normal(0.0, 1.0, size=(self.n, 1))
        sim = rng.normal(1.0, 1.0, size=(self.n, 1))
        net = train_discriminator(real, sim, NetworkArch.discriminator(1, (5,)), LBFGS)
        grid = np.linspace(-2.0, 3.0, 201)
        # density ratio of two unit-variance normals: p0 / (p0 + p1) = sigmoid(0.5 - x)
        err = np.max(np.abs(forward(net, grid[:, None]) - expit(0.5 - grid)))
        report(3, f"max |D - D*| on [-2, 3] = {err:.4f}")
        assert err <= 0.05

    def test_same_distribution(self):
        rng = np.random.default_rng(4)
        real, sim = rng.normal(size=(self.n, 1)), rng.normal(size=(self.n, 1))
        net = train_discriminator(real, sim, NetworkArch.discriminator(1, (5,)), LBFGS)
        loss = cross_entropy(net, real, sim)
        report(3, f"same-distribution loss {loss:.5f}")
        assert abs(loss - LOSS_AT_HALF) <= 0.05


@pytest.mark.criterion(4, "backprop gradient check <= 1e-6 on 50 random small nets")
def test_criterion_04_backprop():
    rng = np.random.default_rng(44)
    worst = 0.0
    for k in range(50):
        n_in = int(rng.integers(1, 5))
        if k % 5 == 4:
            arch = autoencoder_arch(n_in + 1, n_in)
            X = rng.normal(size=(10, n_in + 1))
            Y = X
        else:
            hidden = tuple(int(h) for h in rng.integers(1, 5, size=rng.integers(0, 3)))
            arch = NetworkArch.discriminator(n_in, hidden)
            X = rng.normal(size=(10, n_in))
            Y = (rng.random(10) < 0.5).astype(float)
        p = arch.widths[0]
        net = Network(arch, rng.normal(size=arch.n_params), np.zeros(p), np.ones(p))
        worst = max(worst, gradient_check(net, X, Y))
    report(4, f"worst relative error {worst:.2e}")
    assert worst <= 1e-6


@pytest.mark.criterion(5, "DP matches the Euler closed form and the terminal MPC")
class TestCriterion05DynamicProgram:
    def test_euler_path(self):
        beta, r, nu, x0 = 0.96, 0.02, 3.8, 500_000.0
        procs = flat_processes()
        fiscal = FiscalParams(c_floor=1.0)
        grid = make_grid(procs, fiscal, n_cash=200)
        params = PreferenceParams(nu, 1.0, 1.0, beta=beta, r=r)
        sol = solve_policy(params, fiscal, procs, grid)
        T = len(grid.ages)
        growth = (beta * (1 + r)) ** (1 / nu)
        # closed form: c_t = c_0 g^t with the present value of consumption equal to x0
        c0 = x0 / np.sum((growth / (1 + r)) ** np.arange(T))
        closed = c0 * growth ** np.arange(T)
        x, path = x0, []
        for it in range(T):
            c = np.interp(x, grid.cash_grid, sol.consumption[it, 0, 1, 0, 0])
            path.append(c)
            x = (x - c) * (1 + r)
        err = np.max(np.abs(np.array(path) / closed - 1))
        report(5, f"max relative deviation from Euler path {err:.5f}")
        assert err <= 0.005

    def test_terminal_slope(self, synthetic, truth_solution):
        procs, fiscal, grid = synthetic
        params, sol = truth_solution
        cons = sol.consumption[-1]
        slopes = []
        for x in (60_000.0, 150_000.0, 400_000.0, 900_000.0):
            hi = np.interp(x + 500, grid.cash_grid, cons[0, 1, 3, 2])
            lo = np.interp(x - 500, grid.cash_grid, cons[0, 1, 3, 2])
            slopes.append((hi - lo) / 1_000.0)
        report(5, f"terminal slopes {np.round(slopes, 4).tolist()} vs MPC {params.mpc}")
        assert np.all(np.abs(np.array(slopes) - params.mpc) <= 0.01)


TOY_CFG = EstimationConfig(lower=(-3.0,), upper=(3.0,), steps=(0.01,), hidden=())


def toy_problem(seed, n=1_000, m=1_000, loc=0.7):
    rng = np.random.default_rng(seed)
    real = rng.normal(loc, 1.0, size=(n, 1))
    return AdversarialProblem(real, GaussianLocationSimulator(rng.standard_normal(m)), hidden=(), train=LBFGS)


@pytest.mark.criterion(6, "toy pipeline within 2 SE of the closed-form oracle, 20 replications")
def test_criterion_06_toy_recovery():
    se = math.sqrt(1 / 1_000 + 1 / 1_000)
    gaps = []
    for rep in range(20):
        problem = toy_problem(600 + rep)
        res = estimate(problem, TOY_CFG)
        assert res.converged
        gaps.append(abs(res.theta[0] - problem.simulator.oracle(problem.real)))
    report(6, f"max |theta - oracle| = {max(gaps):.4f} (2 SE = {2 * se:.4f})")
    assert max(gaps) < 2 * se


@pytest.fixture(scope="module")
def desk_mc(synthetic):
    procs, fiscal, grid = synthetic
    return monte_carlo(TRUTH, R=10, n=2_000, economy=Economy(procs, fiscal, grid), cells=(("X1", (5,)),),
                       seed=2024, m=2_000)


@pytest.mark.criterion(7, "desk Monte Carlo (R=10, n=m=2000, X1, 5 nodes) recovers the truth")
class TestCriterion07MonteCarlo:
    def test_mean_within_three_mc_se(self, desk_mc):
        est = np.asarray(desk_mc.estimates["X1:5"])
        ok = np.asarray(desk_mc.converged["X1:5"], bool)
        kept = est[ok]
        assert len(kept) >= 2, f"only {len(kept)} converged replications"
        mean, se = kept.mean(axis=0), kept.std(axis=0, ddof=1) / np.sqrt(len(kept))
        z = (mean - np.array(TRUTH.theta)) / se
        report(7, f"converged {ok.sum()}/10, mean {np.round(mean, 4).tolist()}, z {np.round(z, 2).tolist()}")
        assert np.all(np.abs(z) <= 3)

    def test_inside_reference_band(self, desk_mc):
        est = np.asarray(desk_mc.estimates["X1:5"])
        ok = np.asarray(desk_mc.converged["X1:5"], bool)
        lo = np.array([b[0] for b in REFERENCE_BAND_95.values()])
        hi = np.array([b[1] for b in REFERENCE_BAND_95.values()])
        inside = np.all((est >= lo) & (est <= hi), axis=1) & ok
        per = ((est >= lo) & (est <= hi) & ok[:, None]).sum(axis=0).tolist()
        report(7, f"{inside.sum()}/10 converged estimates inside the 95% band (per parameter {per})")
        assert inside.sum() >= 8


@pytest.mark.criterion(8, "pooled loss near the optimum is quadratic (R^2 >= 0.8)")
def test_criterion_08_quadratic_shape(desk_mc):
    cfg = EstimationConfig.structural()
    traces = [t for runs in desk_mc.traces["X1:5"] for t in runs]
    devs, rel = pooled_loss_points(traces, cfg.lower, cfg.upper)
    r2, _ = quadratic_fit(devs, rel)
    report(8, f"R^2 {r2:.3f} over {len(rel)} pooled points")
    assert r2 >= 0.8


@pytest.mark.criterion(9, "toy bootstrap sd within 25% of the analytic sd; byte-exact determinism")
def test_criterion_09_bootstrap():
    n = m = 1_000
    problem = toy_problem(900, n, m)
    res = bootstrap(problem, TOY_CFG, 100, seed=7)
    analytic = math.sqrt(1 / n + 1 / m)
    sd = float(res.sd[0])
    report(9, f"bootstrap sd {sd:.4f} vs analytic {analytic:.4f}, excluded {res.excluded}")
    assert abs(sd / analytic - 1) <= 0.25
    small = toy_problem(901, 300, 300)
    assert bootstrap(small, TOY_CFG, 5, seed=3).to_json() == bootstrap(small, TOY_CFG, 5, seed=3).to_json()


@pytest.mark.criterion(10, "counterfactual none is exactly 0%; no-bequest lowers total assets")
def test_criterion_10_counterfactual(synthetic):
    procs, fiscal, grid = synthetic
    sim = StructuralSimulator(procs, fiscal, grid, draw_shocks(2_000, 101), draw_initials(2_000, 102))
    none = counterfactual(TRUTH.theta, "none", sim)
    assert np.all(none.pct_difference == 0.0)
    nob = counterfactual(TRUTH.theta, "no_bequest", sim)
    report(10, f"no-bequest total {nob.counterfactual_k[-1]:.1f}k vs baseline {nob.baseline_k[-1]:.1f}k")
    assert TRUTH.theta_intensity > 0
    assert nob.counterfactual_k[-1] <= nob.baseline_k[-1]


def rank_two_binary(n=1_000, seed=11):
    rng = np.random.default_rng(seed)
    f = (rng.random((n, 2)) < 0.5).astype(float)
    X = np.column_stack([f[:, 0]] * 6 + [f[:, 1]] * 6)
    X[:, 1::2] = 1 - X[:, 1::2]
    return X


@pytest.mark.criterion(11, "autoencoder recovers a rank-2 binary oracle; MSE nonincreasing in d")
def test_criterion_11_autoencoder():
    X = rank_two_binary()
    cfg = TrainConfig(optimizer="lbfgs", restarts=3)
    fits = {d: train_autoencoder(X, d, cfg) for d in (1, 2, 3, 4)}
    corr = fits[2].correlation
    mse = [fits[d].mse for d in (1, 2, 3, 4)]
    report(11, f"min correlation at d=2 {corr.min():.4f}; MSE by d {np.round(mse, 5).tolist()}; "
               f"reference {REFERENCE_PROBE_CORRELATION_D4} at d=4 not reproduced")
    assert np.all(corr >= 0.99)
    assert all(b <= a + 1e-3 for a, b in zip(mse, mse[1:]))
