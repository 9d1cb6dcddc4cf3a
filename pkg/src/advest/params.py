"""Preference and fiscal parameters, utility primitives and the bequest reparameterization.

The estimator searches over ``(nu, mpc, k)``: risk aversion, the marginal
propensity to consume out of resources at the moment of death, and the bequest
curvature shifter in dollars.  The intensity ``theta`` and the implied asset
floor follow from

    Z     = [beta * theta * (1 + r)] ** (1 / nu)
    mpc   = (1 + r) / (1 + r + Z)
    floor = k / Z

so ``mpc == 1`` is the model without a bequest motive (``theta == 0``, infinite
floor).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

DEFAULT_BETA = 0.971
DEFAULT_R = 0.02
DEFAULT_C_FLOOR = 4_500.0

#: Asset floor reported when the bequest motive is switched off.
NO_BEQUEST_FLOOR = math.inf


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class UnsupportedParameterError(ValueError):
    """A parameter value the model deliberately does not handle."""


def _check_nu(nu: float) -> None:
    if not nu > 0:
        raise DomainError(f"risk aversion must be positive, got nu={nu}")
    if nu == 1.0:
        raise UnsupportedParameterError(
            "nu=1 (log utility) is not supported; use a CRRA coefficient different from 1"
        )


def crra_utility(c, nu: float):
    """CRRA utility ``c**(1-nu) / (1-nu)``; accepts scalars or arrays."""
    _check_nu(nu)
    c_arr = np.asarray(c, dtype=float)
    if np.any(~(c_arr > 0)):
        raise DomainError("consumption must be strictly positive")
    out = c_arr ** (1.0 - nu) / (1.0 - nu)
    return float(out) if out.ndim == 0 else out


def derive_bequest_transform(nu: float, mpc: float, k_curv: float,
                             beta: float = DEFAULT_BETA, r: float = DEFAULT_R) -> tuple[float, float]:
    """Map ``(nu, mpc, k)`` to the bequest intensity and the implied asset floor.

    Returns
    -------
    theta_intensity, asset_floor
        ``mpc == 1`` returns ``(0.0, NO_BEQUEST_FLOOR)``.
    """
    _check_nu(nu)
    if not (0.0 < mpc <= 1.0):
        raise DomainError(f"mpc must lie in (0, 1], got {mpc}")
    if not k_curv > 0:
        raise DomainError(f"bequest curvature k must be positive, got {k_curv}")
    if not beta > 0:
        raise DomainError(f"beta must be positive, got {beta}")
    if not r > -1:
        raise DomainError(f"r must exceed -1, got {r}")
    if mpc == 1.0:
        return 0.0, NO_BEQUEST_FLOOR
    z = (1.0 + r) * (1.0 - mpc) / mpc
    theta = z ** nu / (beta * (1.0 + r))
    return theta, k_curv / z


def recover_theta(nu: float, theta_intensity: float, asset_floor: float,
                  beta: float = DEFAULT_BETA, r: float = DEFAULT_R) -> tuple[float, float, float]:
    """Inverse of :func:`derive_bequest_transform`: ``(nu, theta, floor) -> (nu, mpc, k)``.

    Without a bequest motive the curvature is not identified and ``nan`` is returned for it.
    """
    _check_nu(nu)
    if theta_intensity < 0:
        raise DomainError("bequest intensity must be nonnegative")
    if theta_intensity == 0.0:
        return nu, 1.0, math.nan
    z = (beta * theta_intensity * (1.0 + r)) ** (1.0 / nu)
    return nu, (1.0 + r) / (1.0 + r + z), asset_floor * z


@dataclass(frozen=True)
class PreferenceParams:
    """Preference parameters in the estimation parameterization plus derived quantities.

    Construct through :meth:`from_theta`; the derived ``theta_intensity`` and
    ``asset_floor`` are filled in automatically.
    """

    nu: float
    mpc: float
    k_curv: float
    beta: float = DEFAULT_BETA
    r: float = DEFAULT_R
    theta_intensity: float = field(init=False)
    asset_floor: float = field(init=False)

    def __post_init__(self):
        theta, floor = derive_bequest_transform(self.nu, self.mpc, self.k_curv, self.beta, self.r)
        object.__setattr__(self, "theta_intensity", theta)
        object.__setattr__(self, "asset_floor", floor)

    @classmethod
    def from_theta(cls, theta, beta: float = DEFAULT_BETA, r: float = DEFAULT_R) -> "PreferenceParams":
        nu, mpc, k = (float(v) for v in theta)
        return cls(nu=nu, mpc=mpc, k_curv=k, beta=beta, r=r)

    @property
    def theta(self) -> tuple[float, float, float]:
        return (self.nu, self.mpc, self.k_curv)

    @property
    def has_bequest_motive(self) -> bool:
        return self.theta_intensity > 0.0

    def without_bequest(self) -> "PreferenceParams":
        return PreferenceParams(self.nu, 1.0, self.k_curv, self.beta, self.r)

    def to_dict(self) -> dict:
        return {
            "nu": self.nu, "mpc": self.mpc, "k_curv": self.k_curv,
            "beta": self.beta, "r": self.r,
            "theta_intensity": self.theta_intensity,
            "asset_floor": None if math.isinf(self.asset_floor) else self.asset_floor,
        }


def bequest_utility(e, params: PreferenceParams):
    """Warm-glow utility ``theta * (e + k)**(1-nu) / (1-nu)`` from leaving estate ``e``."""
    e_arr = np.asarray(e, dtype=float)
    if np.any(e_arr < 0):
        raise DomainError("estate must be nonnegative")
    if params.theta_intensity == 0.0:
        out = np.zeros_like(e_arr)
    else:
        base = e_arr + params.k_curv
        if np.any(~(base > 0)):
            raise DomainError("e + k must be positive")
        out = params.theta_intensity * base ** (1.0 - params.nu) / (1.0 - params.nu)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class FiscalParams:
    """Tax schedule, estate tax and consumption floor.

    ``tau`` is a tuple of ``(threshold, marginal_rate)`` brackets with strictly
    increasing thresholds; income below the first threshold is untaxed.
    ``tax_base`` selects whether the income tax applies to interest plus
    nonasset income (``"total"``) or to interest only (``"interest"``).
    """

    tau: tuple = ((0.0, 0.0),)
    tilde_tau: float = 0.0
    tilde_x: float = 0.0
    c_floor: float = DEFAULT_C_FLOOR
    tax_base: str = "total"

    def __post_init__(self):
        tau = tuple((float(t), float(rate)) for t, rate in self.tau)
        object.__setattr__(self, "tau", tau)
        if not tau:
            raise DomainError("tax schedule needs at least one bracket")
        thresholds = [t for t, _ in tau]
        if any(b <= a for a, b in zip(thresholds, thresholds[1:])):
            raise DomainError("bracket thresholds must be strictly increasing")
        if thresholds[0] < 0:
            raise DomainError("bracket thresholds must be nonnegative")
        if any(not (0.0 <= rate < 1.0) for _, rate in tau):
            raise DomainError("marginal tax rates must lie in [0, 1)")
        if not (0.0 <= self.tilde_tau < 1.0):
            raise DomainError("estate tax rate must lie in [0, 1)")
        if self.tilde_x < 0:
            raise DomainError("estate deduction must be nonnegative")
        if not self.c_floor > 0:
            raise DomainError("consumption floor must be positive")
        if self.tax_base not in ("total", "interest"):
            raise DomainError("tax_base must be 'total' or 'interest'")

    def bracket_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        thr = np.array([t for t, _ in self.tau], dtype=float)
        rates = np.array([rate for _, rate in self.tau], dtype=float)
        return thr, rates

    def to_dict(self) -> dict:
        return {
            "tau": [list(b) for b in self.tau], "tilde_tau": self.tilde_tau,
            "tilde_x": self.tilde_x, "c_floor": self.c_floor, "tax_base": self.tax_base,
        }


def income_tax(gross, tau) -> np.ndarray | float:
    thr = np.array([t for t, _ in tau], dtype=float)
    rates = np.array([rate for _, rate in tau], dtype=float)
    g = np.asarray(gross, dtype=float)
    upper = np.append(thr[1:], np.inf)
    slices = np.clip(g[..., None] - thr, 0.0, upper - thr)
    out = slices @ rates
    return float(out) if out.ndim == 0 else out


def after_tax_income(gross, tau) -> np.ndarray | float:
    """Post-tax income ``y_n(gross)`` under a piecewise-linear bracket schedule."""
    g = np.asarray(gross, dtype=float)
    if np.any(g < 0):
        raise DomainError("gross income must be nonnegative")
    out = g - income_tax(g, tau)
    return float(out) if np.ndim(out) == 0 else out


def estate_after_tax(e_gross, tilde_tau: float, tilde_x: float):
    """Estate net of the estate tax: ``e - max(0, tilde_tau * (e - tilde_x))``."""
    e = np.asarray(e_gross, dtype=float)
    out = e - np.maximum(0.0, tilde_tau * (e - tilde_x))
    return float(out) if out.ndim == 0 else out
