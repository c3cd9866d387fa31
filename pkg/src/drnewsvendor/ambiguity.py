"""Ambiguity sets around predictive distributions.

Two families: first-order stochastic dominance bands around a generation
CDF, produced by double-power deformation operators with radius ``rho``,
and interval balls around the estimated Bernoulli chance of success with
radius ``epsilon``.

The operator pair used here is

    upper(u) = (1 - (1 - u)^(1/(1-rho)))^(1-rho)
    lower(u) = 1 - (1 - u^(1/(1-rho)))^(1-rho)

which interpolates between the identity at rho = 0 and the Heaviside
bounds as rho -> 1, and satisfies the reflection identity
``upper(1 - u) = 1 - lower(u)``. The two maps are mutual inverses on
[0, 1], so each operator's inverse is simply the mirror operator.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .distributions import Heaviside, UnitDistribution, _match_input, _validate_prob

__all__ = [
    "double_power_upper",
    "double_power_lower",
    "double_power_upper_inverse",
    "double_power_lower_inverse",
    "DeformedCdf",
    "deform_upper",
    "deform_lower",
    "FsdAmbiguitySet",
    "make_fsd_set",
    "BallKind",
    "BernoulliBall",
    "make_bernoulli_ball",
]

# level-adjusted radii beyond this are fully clipped anyway
MAX_LEVEL_ADJUSTED_EPSILON = 10.0


def _check_rho(rho: float, *, allow_one: bool = False) -> float:
    rho = float(rho)
    hi_ok = rho <= 1.0 if allow_one else rho < 1.0
    if not (0.0 <= rho and hi_ok):
        bound = "[0, 1]" if allow_one else "[0, 1)"
        raise ValueError(f"deformation radius must lie in {bound}, got {rho}")
    return rho


def double_power_upper(u, rho: float):
    """Push CDF values toward 1 (mass toward the lower support bound)."""
    rho = _check_rho(rho)
    arr = _validate_prob(u, "u")
    beta = 1.0 - rho
    with np.errstate(divide="ignore"):
        inner = -np.expm1(np.log1p(-arr) / beta)  # 1 - (1-u)^(1/beta), stable near 0 and 1
        out = np.power(inner, beta)
    return _match_input(u, out)


def double_power_lower(u, rho: float):
    """Push CDF values toward 0 (mass toward the upper support bound)."""
    rho = _check_rho(rho)
    arr = _validate_prob(u, "u")
    beta = 1.0 - rho
    with np.errstate(divide="ignore"):
        root = np.exp(np.log(arr) / beta)  # u^(1/beta)
        out = -np.expm1(beta * np.log1p(-root))
    return _match_input(u, out)


def double_power_upper_inverse(p, rho: float):
    """Inverse of the upper operator; coincides with the lower operator."""
    return double_power_lower(p, rho)


def double_power_lower_inverse(p, rho: float):
    """Inverse of the lower operator; coincides with the upper operator."""
    return double_power_upper(p, rho)


class DeformedCdf(UnitDistribution):
    """A reference CDF deformed pointwise by a double-power operator.

    Quantiles compose the reference quantile with the operator's closed-form
    inverse; no root finding is involved.
    """

    def __init__(self, reference: UnitDistribution, rho: float, side: str):
        if side not in ("upper", "lower"):
            raise ValueError(f"side must be 'upper' or 'lower', got {side!r}")
        self.reference = reference
        self.rho = _check_rho(rho)
        self.side = side
        if side == "upper":
            self._op, self._inv = double_power_upper, double_power_upper_inverse
        else:
            self._op, self._inv = double_power_lower, double_power_lower_inverse

    def cdf(self, x):
        return self._op(self.reference.cdf(x), self.rho)

    def quantile(self, p):
        _validate_prob(p, "p")
        return self.reference.quantile(self._inv(p, self.rho))

    def _breakpoints(self) -> tuple[float, ...]:
        return self.reference._breakpoints()

    def __repr__(self) -> str:
        return f"DeformedCdf({self.reference!r}, rho={self.rho:g}, side={self.side!r})"


def deform_upper(reference: UnitDistribution, rho: float) -> DeformedCdf:
    """Upper FSD bound of the reference at radius ``rho`` in [0, 1)."""
    return DeformedCdf(reference, rho, "upper")


def deform_lower(reference: UnitDistribution, rho: float) -> DeformedCdf:
    """Lower FSD bound of the reference at radius ``rho`` in [0, 1)."""
    return DeformedCdf(reference, rho, "lower")


@dataclass(frozen=True)
class FsdAmbiguitySet:
    """First-order stochastic dominance band around a reference CDF."""

    reference: UnitDistribution
    radius: float
    upper: UnitDistribution
    lower: UnitDistribution


def make_fsd_set(reference: UnitDistribution, rho: float) -> FsdAmbiguitySet:
    """Bundle the reference with its deformed bounds.

    ``rho = 1`` is stored as the Heaviside limit pair, matching the robust
    limit of the operators.
    """
    rho = _check_rho(rho, allow_one=True)
    if rho == 1.0:
        return FsdAmbiguitySet(reference, rho, upper=Heaviside(0.0), lower=Heaviside(1.0))
    return FsdAmbiguitySet(
        reference, rho,
        upper=deform_upper(reference, rho),
        lower=deform_lower(reference, rho),
    )


class BallKind(Enum):
    UNIFORM = "uniform"
    LEVEL_ADJUSTED = "level_adjusted"


@dataclass(frozen=True)
class BernoulliBall:
    """Interval of plausible chances of success around an estimate."""

    center: float
    radius: float
    kind: BallKind
    shape: float | None
    tau_lo: float
    tau_hi: float

    def __post_init__(self):
        if not (0.0 <= self.tau_lo <= self.center <= self.tau_hi <= 1.0):
            raise ValueError(
                f"ball bounds must satisfy 0 <= lo <= center <= hi <= 1, "
                f"got [{self.tau_lo}, {self.tau_hi}] around {self.center}"
            )


def make_bernoulli_ball(
    tau_hat: float,
    epsilon: float,
    kind: BallKind | str = BallKind.UNIFORM,
    theta: float | None = None,
) -> BernoulliBall:
    """Build a uniform or level-adjusted ball around the estimate ``tau_hat``.

    The uniform half-width is ``epsilon``; the level-adjusted one is
    ``epsilon * (1 - 4*theta*tau_hat*(1-tau_hat))``, narrower near
    ``tau_hat = 0.5`` and widest at the bounds. Both are clipped to [0, 1].
    """
    tau_hat = float(_validate_prob(tau_hat, "tau_hat"))
    kind = BallKind(kind)
    epsilon = float(epsilon)
    if epsilon < 0.0:
        raise ValueError(f"ball radius must be non-negative, got {epsilon}")
    if kind is BallKind.UNIFORM:
        if theta is not None:
            raise ValueError("theta only applies to level-adjusted balls")
        half = epsilon
    else:
        if theta is None:
            raise ValueError("level-adjusted balls require a shape parameter theta")
        theta = float(theta)
        if not (0.0 <= theta < 1.0):
            raise ValueError(f"theta must lie in [0, 1), got {theta}")
        if epsilon > MAX_LEVEL_ADJUSTED_EPSILON:
            raise ValueError(
                f"level-adjusted radius capped at {MAX_LEVEL_ADJUSTED_EPSILON}, got {epsilon}"
            )
        half = epsilon * (1.0 - 4.0 * theta * tau_hat * (1.0 - tau_hat))
    return BernoulliBall(
        center=tau_hat,
        radius=epsilon,
        kind=kind,
        shape=theta,
        tau_lo=max(tau_hat - half, 0.0),
        tau_hi=min(tau_hat + half, 1.0),
    )
