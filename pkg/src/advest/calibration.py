"""Synthetic calibration of the exogenous processes.

The first-step tables (health and survival transitions, medical-expense
location/scale, income) are inputs to the estimator.  When no tables are
supplied this module generates a smooth calibration with magnitudes typical
for US retirees aged 70+:

* survival and health are logistic in age, health, gender and PI;
* log medical expenses are linear in age with a level shift for bad health;
* the medical-shock scale rises with age;
* nonasset income is flat in age and increasing in PI.

It is clearly labeled ``synthetic`` and is not an estimate of anything.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .dp import T_MAX, T_MIN, ExogenousProcesses


def _logistic(z):
    return 1.0 / (1.0 + np.exp(-z))


@dataclass(frozen=True)
class SyntheticCalibration:
    n_pi: int = 10
    t_min: int = T_MIN
    t_max: int = T_MAX
    # survival logit: s0 + s_age*(t-70) + s_health*h + s_male*g + s_pi*(I-0.5)
    s0: float = 3.6
    s_age: float = -0.10
    s_health: float = 0.7
    s_male: float = -0.45
    s_pi: float = 0.9
    # health logit (probability of being healthy next period)
    h0: float = -0.6
    h_age: float = -0.03
    h_health: float = 2.6
    h_pi: float = 0.8
    # log medical expenses
    m0: float = 7.3
    m_age: float = 0.055
    m_unhealthy: float = 0.45
    m_pi: float = 0.35
    m_male: float = -0.1
    sigma0: float = 0.85
    sigma_age: float = 0.01
    rho: float = 0.92
    sigma_xi: float = 0.80
    sigma_eps: float = 0.22
    # nonasset income
    y_base: float = 6_000.0
    y_pi: float = 16_000.0
    y_male: float = 1_500.0

    def build(self) -> ExogenousProcesses:
        ages = np.arange(self.t_min, self.t_max + 1, dtype=float)
        pi_nodes = np.linspace(0.0, 1.0, self.n_pi)
        g = np.arange(2.0)[:, None, None, None]
        h = np.arange(2.0)[None, :, None, None]
        pi = pi_nodes[None, None, :, None]
        age = (ages - self.t_min)[None, None, None, :]

        pi_s = _logistic(self.s0 + self.s_age * age + self.s_health * h
                         + self.s_male * g + self.s_pi * (pi - 0.5))
        pi_s = np.broadcast_to(pi_s, (2, 2, self.n_pi, len(ages))).copy()
        pi_s[..., -1] = 0.0
        pi_h = _logistic(self.h0 + self.h_age * age + self.h_health * h + self.h_pi * (pi - 0.5))
        pi_h = np.broadcast_to(pi_h, pi_s.shape).copy()
        med_loc = (self.m0 + self.m_age * age + self.m_unhealthy * (1 - h)
                   + self.m_pi * pi + self.m_male * g)
        med_loc = np.broadcast_to(med_loc, pi_s.shape).copy()
        med_scale = np.broadcast_to(self.sigma0 + self.sigma_age * age, pi_s.shape).copy()
        income = self.y_base + self.y_pi * pi_nodes[None, :, None] + self.y_male * np.arange(2.0)[:, None, None]
        income = np.broadcast_to(income, (2, self.n_pi, len(ages))).copy()
        return ExogenousProcesses(
            pi_h=pi_h, pi_s=pi_s, med_loc=med_loc, med_scale=med_scale, income=income,
            rho=self.rho, sigma_xi=self.sigma_xi, sigma_eps=self.sigma_eps, pi_nodes=pi_nodes,
            t_min=self.t_min, t_max=self.t_max, label="synthetic (illustrative, not estimated)",
        )

    def to_dict(self) -> dict:
        return asdict(self)


def synthetic_processes(**overrides) -> ExogenousProcesses:
    return SyntheticCalibration(**overrides).build()


@dataclass(frozen=True)
class InitialDistribution:
    """Synthetic 1996 cross-section used in pure Monte Carlo mode.

    Age is drawn from ``age_min`` plus a geometric number of years (capped at
    ``age_max``); assets are zero with a probability that falls with PI and
    otherwise lognormal with a PI-dependent median, truncated at ``asset_cap``
    so draws stay inside the solution grid.
    """

    male_share: float = 0.2
    age_min: int = 72
    age_max: int = 96
    age_decay: float = 0.12
    healthy_logit0: float = 0.4
    healthy_logit_pi: float = 1.2
    zero_asset_p0: float = 0.35
    asset_median0: float = 8_000.0
    asset_median_pi: float = 160_000.0
    asset_log_sd: float = 1.0
    asset_cap: float = 1_500_000.0

    def to_dict(self) -> dict:
        return asdict(self)
