"""Estimating the Bernoulli chance of success from settled market outcomes.

The estimator is the frequency of overage-penalized periods: each settled
period contributes a binary outcome (1 overage, 0 underage) and
no-balancing periods are excluded since they carry no penalty
information. A separate moving-average model per hour of day captures the
daily pattern of system imbalances.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .economics import PenaltyPair, bernoulli_outcome

__all__ = [
    "TauEstimatorConfig",
    "estimate_tau",
    "HourlyTauEstimator",
    "hourly_tau_forecast",
]


@dataclass(frozen=True)
class TauEstimatorConfig:
    """Moving-average window and exclusion behavior for tau forecasting."""

    window_days: int = 90
    per_hour: bool = True
    fallback_tau: float | None = None

    def __post_init__(self):
        if self.window_days < 1:
            raise ValueError(f"window must cover at least one day, got {self.window_days}")
        if self.fallback_tau is not None and not (0.0 <= self.fallback_tau <= 1.0):
            raise ValueError(f"fallback tau must lie in [0, 1], got {self.fallback_tau}")


def estimate_tau(samples: Sequence[float]) -> float:
    """Sample mean of observed binary outcomes."""
    arr = np.asarray(samples, dtype=float)
    if arr.size == 0:
        raise ValueError("cannot estimate tau from an empty sample")
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValueError("outcomes must lie in [0, 1]")
    return float(arr.mean())


class HourlyTauEstimator:
    """Per-hour moving-average forecaster over settled penalty outcomes.

    History is bucketed by hour of day with prefix sums over the day axis,
    so a windowed forecast is O(log n). Periods whose penalty pair is all
    zero are skipped; the raw penalty sums are kept for diagnostics.
    """

    def __init__(self, history: Iterable[tuple[int, int, PenaltyPair]]):
        by_hour: dict[int, list[tuple[int, int, float, float]]] = {}
        for day, hour, pair in history:
            s = bernoulli_outcome(pair)
            if s is None:
                continue
            by_hour.setdefault(int(hour), []).append(
                (int(day), s, pair.overage, pair.underage)
            )
        self._hours: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]] = {}
        for hour, entries in by_hour.items():
            entries.sort(key=lambda e: e[0])
            days = np.array([e[0] for e in entries], dtype=np.int64)
            if np.any(np.diff(days) == 0):
                raise ValueError(f"duplicate day for hour {hour}")
            ones = np.concatenate(([0], np.cumsum([e[1] for e in entries])))
            po = np.concatenate(([0.0], np.cumsum([e[2] for e in entries])))
            pu = np.concatenate(([0.0], np.cumsum([e[3] for e in entries])))
            self._hours[hour] = (days, ones, po, pu)

    def forecast(
        self,
        day: int,
        hour: int,
        window_days: int,
        fallback_tau: float | None = None,
    ) -> float:
        """Mean outcome at ``hour`` over the ``window_days`` days before ``day``."""
        if window_days < 1:
            raise ValueError(f"window must cover at least one day, got {window_days}")
        tau, _ = self._window(day, hour, window_days)
        if tau is None:
            if fallback_tau is None:
                raise ValueError(
                    f"no usable outcomes for hour {hour} in the {window_days} days "
                    f"before day {day}; supply a fallback tau to proceed"
                )
            return float(fallback_tau)
        return tau

    def diagnostics(self, day: int, hour: int, window_days: int) -> dict[str, float]:
        """Windowed penalty averages alongside the frequency estimate."""
        tau, extras = self._window(day, hour, window_days)
        out = {"tau_hat": float("nan") if tau is None else tau}
        out.update(extras)
        return out

    def _window(self, day: int, hour: int, window_days: int):
        bucket = self._hours.get(int(hour))
        if bucket is None:
            return None, {"count": 0.0, "mean_overage": 0.0, "mean_underage": 0.0}
        days, ones, po, pu = bucket
        lo = int(np.searchsorted(days, day - window_days, side="left"))
        hi = int(np.searchsorted(days, day - 1, side="right"))
        count = hi - lo
        if count <= 0:
            return None, {"count": 0.0, "mean_overage": 0.0, "mean_underage": 0.0}
        n_ones = float(ones[hi] - ones[lo])
        extras = {
            "count": float(count),
            "mean_overage": float((po[hi] - po[lo]) / count),
            "mean_underage": float((pu[hi] - pu[lo]) / count),
        }
        return n_ones / count, extras


def hourly_tau_forecast(
    history: Iterable[tuple[int, int, PenaltyPair]],
    window_days: int,
    target: tuple[int, int],
    fallback_tau: float | None = None,
) -> float:
    """Forecast tau for a (day, hour) target from same-hour history.

    Uses the outcomes of the ``window_days`` days strictly before the
    target day at the target hour, skipping unpenalized periods. Raises
    when the window holds no usable observation unless ``fallback_tau``
    is given.
    """
    day, hour = target
    est = HourlyTauEstimator(history)
    return est.forecast(day, hour, window_days, fallback_tau=fallback_tau)
