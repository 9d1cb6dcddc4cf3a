import json

import numpy as np
import pytest

from advest.adversarial import (
    AdversarialProblem,
    EstimationConfig,
    GaussianLocationSimulator,
    StructuralSimulator,
    estimate,
    evaluate_foreign_estimates,
    initial_theta,
    numeric_gradient,
    objective,
)
from advest.nn import LOSS_AT_HALF, TrainConfig
from advest.params import DomainError, PreferenceParams
from advest.sim import build_features, draw_initials, draw_shocks, simulate_panel

TOY_TRAIN = TrainConfig(optimizer="lbfgs")


def toy_problem(seed, n=1_000, m=1_000, truth=0.7):
    rng = np.random.default_rng(seed)
    real = rng.normal(truth, 1.0, size=(n, 1))
    sim = GaussianLocationSimulator(rng.standard_normal(m))
    return AdversarialProblem(real, sim, hidden=(), train=TOY_TRAIN)


TOY_CFG = EstimationConfig(lower=(-3.0,), upper=(3.0,), steps=(0.01,), hidden=())


class TestNumericGradient:
    def test_quadratic_exact(self):
        target = np.array([1.0, -2.0, 0.5])
        theta = np.array([0.3, 0.1, 2.0])
        g = numeric_gradient(lambda t: np.sum((t - target) ** 2), theta, [1e-3] * 3)
        assert g == pytest.approx(2 * (theta - target), rel=1e-6)

    def test_constant(self):
        assert np.all(numeric_gradient(lambda t: 4.2, np.ones(3), [0.1] * 3) == 0)

    def test_calculus_oracle(self):
        g = numeric_gradient(lambda t: np.sin(t[0]) + t[1] ** 2, np.array([1.0, 0.5, 0.0]), [1e-4] * 3)
        assert g == pytest.approx([np.cos(1.0), 1.0, 0.0], abs=1e-6)

    def test_steps_shrink_at_bounds(self):
        seen = []

        def f(t):
            seen.append(np.array(t))
            return float(np.sum(t ** 2))

        theta = np.array([0.0, 0.99])
        g = numeric_gradient(f, theta, [0.1, 0.1], lower=[0.0, 0.0], upper=[1.0, 1.0])
        pts = np.array(seen)
        assert np.all(pts >= 0.0) and np.all(pts <= 1.0)
        assert g[0] == pytest.approx(0.1, abs=1e-12)  # one-sided from the bound
        # asymmetric stencil [0.89, 1.0]: (1 - 0.89**2) / 0.11
        assert g[1] == pytest.approx(1.89, abs=1e-9)


class TestConfig:
    def test_zero_restarts(self):
        with pytest.raises(DomainError):
            EstimationConfig(restarts=0)

    def test_bad_box(self):
        with pytest.raises(DomainError):
            EstimationConfig(lower=(1.0, 0.1, 10.0), upper=(1.0, 0.5, 20.0))
        with pytest.raises(DomainError):
            EstimationConfig.structural(lower=(1.5, 0.0, 500.0))
        with pytest.raises(DomainError):
            EstimationConfig(steps=(0.0, 0.1, 1.0))

    def test_initial_theta_in_box(self):
        cfg = EstimationConfig.structural(init_mean=(3.8, 0.25, 10_000.0), init_sd=(1.0, 0.158, 2_000.0))
        for r in range(20):
            t = initial_theta(cfg, r)
            assert np.all(t >= cfg.lower) and np.all(t <= cfg.upper)
        assert np.array_equal(initial_theta(cfg, 3), initial_theta(cfg, 3))


class TestToyEstimation:
    def test_recovers_difference_of_means(self):
        problem = toy_problem(0)
        res = estimate(problem, TOY_CFG)
        se = np.sqrt(1 / 1_000 + 1 / 1_000)
        assert res.converged
        assert abs(res.theta[0] - problem.simulator.oracle(problem.real)) < 2 * se

    def test_trace_properties(self):
        problem = toy_problem(1)
        res = estimate(problem, EstimationConfig(lower=(-3.0,), upper=(3.0,), steps=(0.01,), hidden=(),
                                                 restarts=3, seed=5))
        assert len(res.traces) == 3
        for trace in res.traces:
            for row in trace:
                assert -3.0 <= row["theta"][0] <= 3.0
                assert LOSS_AT_HALF - 1e-9 <= row["loss"] <= 0.0
                for theta, _ in row["probes"]:
                    assert -3.0 <= theta[0] <= 3.0
            losses = [row["loss"] for row in trace]
            half = len(losses) // 2
            if half:
                assert min(losses[:half]) >= min(losses[half:])
        assert res.loss == min(t[-1]["loss"] for t in res.traces)

    @pytest.mark.parametrize("accel", ["nag", "plain"])
    def test_other_accelerators(self, accel):
        problem = toy_problem(2)
        cfg = EstimationConfig(lower=(-3.0,), upper=(3.0,), steps=(0.01,), hidden=(), accelerator=accel,
                               learning_rate=0.05, max_iter=150)
        res = estimate(problem, cfg)
        assert abs(res.theta[0] - problem.simulator.oracle(problem.real)) < 0.05

    def test_not_converged_flag(self):
        problem = toy_problem(3)
        cfg = EstimationConfig(lower=(-3.0,), upper=(3.0,), steps=(0.01,), hidden=(), max_iter=2,
                               init_mean=(2.5,))
        assert not estimate(problem, cfg).converged

    def test_serialization(self, tmp_path):
        res = estimate(toy_problem(4), TOY_CFG)
        d = json.loads(res.to_json())
        assert d["theta"]["location"] == pytest.approx(res.theta[0])
        path = tmp_path / "trace.csv"
        res.traces_to_csv(path)
        assert path.read_text().splitlines()[0] == "restart,iteration,location,loss,grad_location"

    def test_common_random_numbers_smooth(self):
        problem = toy_problem(5)
        for t in np.linspace(-1.0, 2.0, 5):
            gaps = [abs(objective([t], problem) - objective([t + d], problem)) for d in (1e-2, 1e-4, 1e-6)]
            assert gaps[2] <= gaps[0] + 1e-12
            assert gaps[2] < 1e-5


@pytest.fixture(scope="module")
def structural(synthetic, truth_solution):
    procs, fiscal, grid = synthetic
    params, sol = truth_solution
    n = 400
    initials = draw_initials(n, 21)
    shocks = draw_shocks(n, 22)
    real = build_features(simulate_panel(sol, procs, fiscal, shocks, initials, params.r), "X1")
    train = TrainConfig(optimizer="adam_full", epochs=400, learning_rate=0.02)
    same = AdversarialProblem(real, StructuralSimulator(procs, fiscal, grid, shocks, initials), (5,), train)
    other = StructuralSimulator(procs, fiscal, grid, draw_shocks(n, 23), initials)
    return params, same, AdversarialProblem(real, other, (5,), train)


class TestStructuralObjective:
    def test_self_match_is_indistinguishable(self, structural):
        params, same, _ = structural
        assert objective((params.nu, params.mpc, params.k_curv), same) == pytest.approx(LOSS_AT_HALF, abs=1e-3)

    def test_far_theta_is_worse(self, structural):
        params, same, _ = structural
        base = objective((params.nu, params.mpc, params.k_curv), same)
        assert objective((2 * params.nu, params.mpc, params.k_curv), same) > base

    def test_repeatable_and_foreign_path(self, structural):
        params, _, problem = structural
        theta = (params.nu, params.mpc, params.k_curv)
        a = objective(theta, problem)
        assert objective(theta, problem) == a
        assert evaluate_foreign_estimates(theta, problem) == a
        assert evaluate_foreign_estimates((6.0, 0.6, 30_000.0), problem) > a

    def test_structural_smoothness(self, structural):
        params, _, problem = structural
        theta = np.array([params.nu, params.mpc, params.k_curv])
        base = objective(theta, problem)
        for j, d in enumerate((1e-6, 1e-7, 1e-3)):
            moved = theta.copy()
            moved[j] += d
            assert abs(objective(moved, problem) - base) < 1e-4
