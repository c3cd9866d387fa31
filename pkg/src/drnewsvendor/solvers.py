"""Closed-form offer rules for the Bernoulli newsvendor and its robust variants.

All solvers return an :class:`OfferDecision` carrying the offer, the rule
that produced it and the intermediate quantities (quantiles, ball bounds,
mean) useful for diagnosis. They are pure functions of their inputs and
safe for arbitrary parallel invocation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType
from typing import Mapping

import numpy as np

from .ambiguity import BernoulliBall, deform_lower, deform_upper
from .distributions import Heaviside, UnitDistribution, _match_input, _validate_prob

__all__ = [
    "Method",
    "OfferDecision",
    "solve_direct",
    "solve_dr_omega",
    "solve_dr_s",
    "solve_robust_s",
    "solve_robust_omega",
    "WorstCaseCdf",
    "worst_case_cdf",
]


class Method(Enum):
    DIRECT = "direct"
    DR_OMEGA = "dr_omega"
    DR_S = "dr_s"
    ROBUST_OMEGA = "robust_omega"
    ROBUST_S = "robust_s"


@dataclass(frozen=True)
class OfferDecision:
    """An offered energy fraction plus the rule and intermediates behind it."""

    y_star: float
    method: Method
    diagnostics: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if not (0.0 <= self.y_star <= 1.0):
            raise ValueError(f"offer must lie in [0, 1], got {self.y_star}")
        object.__setattr__(self, "diagnostics", MappingProxyType(dict(self.diagnostics)))


def solve_direct(dist: UnitDistribution, tau_hat: float) -> OfferDecision:
    """Plain Bernoulli newsvendor: offer the tau_hat-quantile of the forecast."""
    tau_hat = float(_validate_prob(tau_hat, "tau_hat"))
    y = float(dist.quantile(tau_hat))
    return OfferDecision(y, Method.DIRECT, {"tau_hat": tau_hat})


def solve_dr_omega(dist: UnitDistribution, tau_hat: float, rho: float) -> OfferDecision:
    """Robust offer under generation-forecast ambiguity of radius ``rho``.

    The offer is the tau_hat-weighted combination of the two deformed
    quantiles at level tau_hat. ``rho = 1`` is handled as its analytic
    limit, where the offer equals tau_hat itself.
    """
    tau_hat = float(_validate_prob(tau_hat, "tau_hat"))
    rho = float(rho)
    if not (0.0 <= rho <= 1.0):
        raise ValueError(f"rho must lie in [0, 1], got {rho}")
    if rho == 1.0:
        return OfferDecision(
            tau_hat, Method.DR_OMEGA,
            {"tau_hat": tau_hat, "rho": rho, "q_upper": 0.0, "q_lower": 1.0},
        )
    q_upper = float(deform_upper(dist, rho).quantile(tau_hat))
    q_lower = float(deform_lower(dist, rho).quantile(tau_hat))
    y = tau_hat * q_lower + (1.0 - tau_hat) * q_upper
    return OfferDecision(
        y, Method.DR_OMEGA,
        {"tau_hat": tau_hat, "rho": rho, "q_upper": q_upper, "q_lower": q_lower},
    )


def solve_dr_s(dist: UnitDistribution, ball: BernoulliBall) -> OfferDecision:
    """Robust offer under chance-of-success ambiguity.

    Exactly one branch fires: the quantile at the ball's upper bound when it
    sits left of the mean, the quantile at the lower bound when that sits
    right of the mean, and the mean itself otherwise (ties included).
    """
    mu = float(dist.mean())
    q_hi = float(dist.quantile(ball.tau_hi))
    q_lo = float(dist.quantile(ball.tau_lo))
    if q_hi < mu:
        y, branch = q_hi, "upper_quantile"
    elif q_lo > mu:
        y, branch = q_lo, "lower_quantile"
    else:
        y, branch = mu, "mean"
    return OfferDecision(
        y, Method.DR_S,
        {
            "tau_hat": ball.center, "tau_lo": ball.tau_lo, "tau_hi": ball.tau_hi,
            "q_lo": q_lo, "q_hi": q_hi, "mean": mu, "branch": branch,
        },
    )


def solve_robust_s(dist: UnitDistribution) -> OfferDecision:
    """Limit of the chance-of-success-robust offer: the forecast mean."""
    mu = float(dist.mean())
    return OfferDecision(mu, Method.ROBUST_S, {"mean": mu})


def solve_robust_omega(tau_hat: float) -> OfferDecision:
    """Limit of the forecast-robust offer: the estimated chance of success."""
    tau_hat = float(_validate_prob(tau_hat, "tau_hat"))
    return OfferDecision(tau_hat, Method.ROBUST_OMEGA, {"tau_hat": tau_hat})


class WorstCaseCdf(UnitDistribution):
    """The adversarial distribution behind the forecast-ambiguity solution.

    Follows the upper band below its tau_hat-quantile, plateaus at level
    tau_hat between the two band quantiles, and follows the lower band
    above. The plateau makes every offer between the two quantiles an
    expected-loss minimizer at level tau_hat.
    """

    def __init__(self, upper: UnitDistribution, lower: UnitDistribution, level: float):
        self.upper = upper
        self.lower = lower
        self.level = float(_validate_prob(level, "level"))
        self.q_lo = float(upper.quantile(self.level))
        self.q_hi = float(lower.quantile(self.level))
        if self.q_lo > self.q_hi + 1e-12:
            raise ValueError("upper-band quantile exceeds lower-band quantile")

    def cdf(self, x):
        arr = np.asarray(x, dtype=float)
        out = np.where(
            arr < self.q_lo,
            np.asarray(self.upper.cdf(arr), dtype=float),
            np.where(arr < self.q_hi, self.level, np.asarray(self.lower.cdf(arr), dtype=float)),
        )
        return _match_input(x, out)

    def quantile(self, p):
        arr = _validate_prob(p, "p")
        below = np.asarray(self.upper.quantile(np.minimum(arr, self.level)), dtype=float)
        above = np.maximum(np.asarray(self.lower.quantile(arr), dtype=float), self.q_hi)
        # at the plateau level the generalized inverse is its left endpoint
        out = np.where(arr <= self.level, np.minimum(below, self.q_lo), above)
        return _match_input(p, out)

    def _cdf_integral(self, y: float) -> float:
        """Integral of the CDF over [0, y], split at the plateau edges.

        The band pieces reuse the component partial expectations, so no
        quadrature ever crosses the plateau discontinuities.
        """
        total = self.upper.partial_expectations(min(y, self.q_lo))[0]
        if y > self.q_lo:
            total += self.level * (min(y, self.q_hi) - self.q_lo)
        if y > self.q_hi:
            total += (
                self.lower.partial_expectations(y)[0]
                - self.lower.partial_expectations(self.q_hi)[0]
            )
        return total

    def mean(self) -> float:
        return 1.0 - self._cdf_integral(1.0)

    def partial_expectations(self, y: float) -> tuple[float, float]:
        y = float(_validate_prob(y, "y"))
        under = self._cdf_integral(y)
        over = under - y + self.mean()
        return max(under, 0.0), max(over, 0.0)

    def _breakpoints(self) -> tuple[float, ...]:
        pts = set(self.upper._breakpoints()) | set(self.lower._breakpoints())
        pts.update((self.q_lo, self.q_hi))
        return tuple(sorted(b for b in pts if 0.0 < b < 1.0))

    def __repr__(self) -> str:
        return f"WorstCaseCdf(level={self.level:g}, plateau=[{self.q_lo:g}, {self.q_hi:g}])"


def worst_case_cdf(dist: UnitDistribution, tau_hat: float, rho: float) -> UnitDistribution:
    """Adversarial CDF attaining the forecast-ambiguity worst case.

    At ``rho = 0`` the plateau has zero width and the reference itself is
    returned; at ``rho = 1`` the result is the two-point distribution with
    mass ``tau_hat`` at 0 and ``1 - tau_hat`` at 1.
    """
    tau_hat = float(_validate_prob(tau_hat, "tau_hat"))
    rho = float(rho)
    if not (0.0 <= rho <= 1.0):
        raise ValueError(f"rho must lie in [0, 1], got {rho}")
    if rho == 0.0:
        return dist
    if rho == 1.0:
        return WorstCaseCdf(Heaviside(0.0), Heaviside(1.0), tau_hat)
    return WorstCaseCdf(deform_upper(dist, rho), deform_lower(dist, rho), tau_hat)
