"""Market settlement arithmetic under two-price imbalance settlement.

Revenue, the overage/underage penalty split, extraction of the binary
penalty-direction outcome, the scaled opportunity loss, and its
expectation against a predictive distribution. Prices are plain reals in
currency per MWh; no currency rounding is applied.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .distributions import UnitDistribution, _validate_prob

__all__ = [
    "SettlementInput",
    "PenaltyPair",
    "effective_balancing_price",
    "revenue",
    "penalties",
    "bernoulli_outcome",
    "scaled_loss",
    "expected_loss",
    "StrategyRow",
    "regret_and_ratio",
]


@dataclass(frozen=True)
class SettlementInput:
    """One settlement period: prices, system length, offer and realization."""

    pi_s: float
    pi_b: float
    s_l: float
    y: float
    omega_star: float

    def __post_init__(self):
        _validate_prob(self.y, "y")
        _validate_prob(self.omega_star, "omega_star")


@dataclass(frozen=True)
class PenaltyPair:
    """Per-unit overage/underage penalties; at most one is nonzero."""

    overage: float
    underage: float

    def __post_init__(self):
        if self.overage < 0.0 or self.underage < 0.0:
            raise ValueError("penalties must be non-negative after clamping")
        if self.overage > 0.0 and self.underage > 0.0:
            raise ValueError("overage and underage penalties are mutually exclusive")


def effective_balancing_price(pi_s: float, pi_b: float, s_l: float,
                              y: float, omega_star: float) -> float:
    """Price applied to the imbalance: pi_b when it aggravates the system, pi_s otherwise."""
    if (omega_star - y) * s_l > 0.0:
        return float(pi_b)
    return float(pi_s)


def revenue(inp: SettlementInput) -> float:
    """Producer revenue: day-ahead payment plus the settled imbalance."""
    pi_eff = effective_balancing_price(inp.pi_s, inp.pi_b, inp.s_l, inp.y, inp.omega_star)
    return inp.pi_s * inp.y + pi_eff * (inp.omega_star - inp.y)


def penalties(pi_s: float, pi_b: float, s_l: float) -> PenaltyPair:
    """Split the price spread into overage/underage penalties by system length.

    A non-negative system length penalizes overproduction, a negative one
    underproduction. Negative values (spread opposing the system sign) are
    clamped to zero, leaving a no-penalty pair.
    """
    if s_l >= 0.0:
        return PenaltyPair(overage=max(pi_s - pi_b, 0.0), underage=0.0)
    return PenaltyPair(overage=0.0, underage=max(pi_b - pi_s, 0.0))


def bernoulli_outcome(pair: PenaltyPair) -> int | None:
    """Binary penalty direction: 1 for overage, 0 for underage, None when unpenalized."""
    if pair.overage > 0.0:
        return 1
    if pair.underage > 0.0:
        return 0
    return None


def scaled_loss(y: float, omega: float, s: float) -> float:
    """Opportunity cost normalized by the penalty sum.

    ``s`` is the binary penalty direction, or a probability in [0, 1] for
    the expectation form.
    """
    s = float(_validate_prob(s, "s"))
    return s * max(omega - y, 0.0) + (1.0 - s) * max(y - omega, 0.0)


def expected_loss(dist: UnitDistribution, y: float, tau: float) -> float:
    """Expected scaled loss of offer ``y`` when the chance of success is ``tau``."""
    tau = float(_validate_prob(tau, "tau"))
    under, over = dist.partial_expectations(y)
    return (1.0 - tau) * under + tau * over


@dataclass(frozen=True)
class StrategyRow:
    """Aggregate backtest metrics for one strategy."""

    strategy: str
    revenue_per_mwh: float
    regret_per_mwh: float
    advantage_ratio_pct: float | None
    cum_delta_regret: np.ndarray
    total_revenue: float


def regret_and_ratio(
    revenues: Mapping[str, Sequence[float]],
    oracle_revenues: Sequence[float],
    volumes: Sequence[float],
    reference: str | None = "bn",
) -> dict[str, StrategyRow]:
    """Per-MWh revenue and regret, advantage ratio and cumulative delta-regret.

    ``volumes`` are the generated energy amounts used for the per-MWh
    scaling. The advantage ratio counts the periods where a strategy's
    revenue is at least the reference strategy's (the plain newsvendor by
    convention), with a 1e-9-scaled tolerance so economically identical
    settlements that differ by summation-order ulps count as ties; the
    cumulative delta-regret series tracks how much less regret than the
    reference a strategy has accumulated.
    """
    oracle = np.asarray(oracle_revenues, dtype=float)
    vols = np.asarray(volumes, dtype=float)
    if oracle.shape != vols.shape:
        raise ValueError("oracle revenues and volumes must be aligned")
    total_volume = float(vols.sum())
    if total_volume <= 0.0:
        raise ValueError("total generated volume must be positive")

    series = {}
    for name, rev in revenues.items():
        arr = np.asarray(rev, dtype=float)
        if arr.shape != oracle.shape:
            raise ValueError(f"revenue series for {name!r} is misaligned")
        series[name] = arr

    ref = series.get(reference) if reference is not None else None
    rows: dict[str, StrategyRow] = {}
    for name, arr in series.items():
        if ref is not None:
            tie_tol = 1e-9 * np.maximum(1.0, np.abs(ref))
            ratio = float(100.0 * np.mean(arr >= ref - tie_tol))
            cum_delta = np.cumsum(arr - ref)
        else:
            ratio = None
            cum_delta = np.zeros_like(arr)
        rows[name] = StrategyRow(
            strategy=name,
            revenue_per_mwh=float(arr.sum() / total_volume),
            regret_per_mwh=float((oracle - arr).sum() / total_volume),
            advantage_ratio_pct=ratio,
            cum_delta_regret=cum_delta,
            total_revenue=float(arr.sum()),
        )
    return rows
