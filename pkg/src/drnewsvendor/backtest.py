"""Backtesting offer strategies over hourly market data.

The protocol splits the data into a warm start (a chance-of-success
estimation window followed by a cross-validation window) and an
out-of-sample evaluation span. Cross-validation picks each strategy's
parameters by total revenue on its window; evaluation settles every hour
and aggregates per-MWh revenue, regret against the perfect-generation
oracle, the advantage ratio against the plain newsvendor, and the
cumulative regret difference over time.

Gate-closure model: offers for all 24 hours of day D are fixed on day
D-1 using the day-D forecast (issued before gate closure) and penalty
outcomes settled through day D-2 (one-day settlement lag).
"""

from __future__ import annotations

import csv
import json
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .ambiguity import BallKind, make_bernoulli_ball
from .distributions import PiecewiseLinear, UnitDistribution, read_quantile_forecast, write_quantile_forecast
from .economics import SettlementInput, StrategyRow, penalties, regret_and_ratio, revenue
from .estimation import HourlyTauEstimator
from .solvers import solve_direct, solve_dr_omega, solve_dr_s, solve_robust_omega, solve_robust_s

__all__ = [
    "MarketRecord",
    "CvMode",
    "BacktestPlan",
    "ChosenParameters",
    "BacktestReport",
    "STRATEGIES",
    "load_market_data",
    "write_market_csv",
    "write_forecast_dir",
    "cross_validate",
    "run_backtest",
    "offers_for_day",
    "scale_penalties",
    "write_report_json",
    "write_report_csv",
]

STRATEGIES = (
    "oracle",
    "bn",
    "dr_omega",
    "dr_s_uniform",
    "dr_s_level_adjusted",
    "robust_s",
    "robust_omega",
)

# strategies whose offer depends on the estimated chance of success
_TAU_STRATEGIES = frozenset({"bn", "dr_omega", "dr_s_uniform", "dr_s_level_adjusted", "robust_omega"})

MARKET_HEADER = ("timestamp", "pi_s", "pi_b", "s_L", "omega_star")
_TS_FORMAT = "%Y-%m-%dT%H"


@dataclass(frozen=True)
class MarketRecord:
    """One settlement period with its day-ahead forecast."""

    timestamp: datetime
    pi_s: float
    pi_b: float
    s_l: float
    omega_star: float
    forecast: UnitDistribution

    def __post_init__(self):
        if not (0.0 <= self.omega_star <= 1.0):
            raise ValueError(
                f"{self.timestamp.isoformat()}: omega_star must lie in [0, 1], got {self.omega_star}"
            )


class CvMode(Enum):
    FIXED_WINDOW = "fixed_window"
    SLIDING = "sliding"


@dataclass(frozen=True)
class BacktestPlan:
    """Protocol splits, parameter grids and the strategy roster."""

    warm_start_days: int = 131
    tau_window_days: int = 91
    cv_days: int = 40
    cv_mode: CvMode = CvMode.FIXED_WINDOW
    m_grid: tuple[int, ...] = (90,)
    rho_grid: tuple[float, ...] = (0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3)
    epsilon_grid: tuple[float, ...] = (0.0, 0.025, 0.05, 0.075, 0.1, 0.15, 0.2, 0.25)
    theta_grid: tuple[float, ...] = (0.5, 0.9)
    strategies: tuple[str, ...] = ("oracle", "bn", "dr_omega", "dr_s_uniform",
                                   "dr_s_level_adjusted", "robust_s")
    fallback_tau: float | None = None

    def __post_init__(self):
        if self.tau_window_days < 2 or self.cv_days < 1:
            raise ValueError("tau window and cross-validation spans must be positive")
        if self.warm_start_days != self.tau_window_days + self.cv_days:
            raise ValueError(
                f"warm start must equal tau window plus cross-validation days: "
                f"{self.warm_start_days} != {self.tau_window_days} + {self.cv_days}"
            )
        unknown = set(self.strategies) - set(STRATEGIES)
        if unknown:
            raise ValueError(f"unknown strategies: {sorted(unknown)}")
        if not self.m_grid or min(self.m_grid) < 1:
            raise ValueError("m grid must contain positive window lengths")
        if max(self.m_grid) > self.tau_window_days - 1:
            raise ValueError(
                f"largest m ({max(self.m_grid)}) cannot exceed the tau window "
                f"minus one ({self.tau_window_days - 1})"
            )


def _param_grid(strategy: str, plan: BacktestPlan) -> list[dict]:
    """Deterministically ordered candidate parameters; ties favor earlier entries."""
    if strategy in ("oracle", "robust_s"):
        return [{}]
    if strategy in ("bn", "robust_omega"):
        return [{"m": m} for m in plan.m_grid]
    if strategy == "dr_omega":
        return [{"m": m, "rho": r} for m in plan.m_grid for r in plan.rho_grid]
    if strategy == "dr_s_uniform":
        return [{"m": m, "epsilon": e} for m in plan.m_grid for e in plan.epsilon_grid]
    if strategy == "dr_s_level_adjusted":
        return [
            {"m": m, "epsilon": e, "theta": t}
            for m in plan.m_grid for e in plan.epsilon_grid for t in plan.theta_grid
        ]
    raise ValueError(f"unknown strategy {strategy!r}")


@dataclass(frozen=True)
class ChosenParameters:
    """Cross-validation outcome: one parameter set per strategy (per day when sliding)."""

    mode: CvMode
    static: Mapping[str, Mapping[str, float]] | None = None
    per_day: Mapping[int, Mapping[str, Mapping[str, float]]] | None = None

    def params_for(self, strategy: str, day: int) -> Mapping[str, float]:
        if self.mode is CvMode.FIXED_WINDOW:
            assert self.static is not None
            return self.static[strategy]
        assert self.per_day is not None
        return self.per_day[day][strategy]

    def to_json_dict(self) -> dict:
        if self.mode is CvMode.FIXED_WINDOW:
            return {"mode": self.mode.value, "static": {k: dict(v) for k, v in self.static.items()}}
        return {
            "mode": self.mode.value,
            "per_day": {str(d): {k: dict(v) for k, v in strats.items()}
                        for d, strats in self.per_day.items()},
        }

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "ChosenParameters":
        mode = CvMode(data["mode"])
        if mode is CvMode.FIXED_WINDOW:
            return cls(mode=mode, static=data["static"])
        per_day = {int(d): strats for d, strats in data["per_day"].items()}
        return cls(mode=mode, per_day=per_day)


@dataclass(frozen=True)
class BacktestReport:
    """Evaluation-period settlement series and their aggregates."""

    timestamps: tuple[datetime, ...]
    volumes: np.ndarray
    oracle_revenues: np.ndarray
    revenues: Mapping[str, np.ndarray]
    rows: Mapping[str, StrategyRow]
    chosen: ChosenParameters
    eval_days: tuple[int, int]


class _MarketFrame:
    """Day/hour-indexed view of a record list with a shared tau estimator."""

    def __init__(self, records: Sequence[MarketRecord]):
        if not records:
            raise ValueError("no market records")
        for prev, cur in zip(records, records[1:]):
            if cur.timestamp <= prev.timestamp:
                raise ValueError(
                    f"records must be strictly ordered by timestamp; "
                    f"{cur.timestamp.isoformat()} follows {prev.timestamp.isoformat()}"
                )
        self.first_date = records[0].timestamp.date()
        self.by_period: dict[tuple[int, int], MarketRecord] = {}
        for rec in records:
            day = (rec.timestamp.date() - self.first_date).days + 1
            self.by_period[(day, rec.timestamp.hour)] = rec
        self.n_days = max(d for d, _ in self.by_period)
        self.estimator = HourlyTauEstimator(
            (day, hour, penalties(rec.pi_s, rec.pi_b, rec.s_l))
            for (day, hour), rec in self.by_period.items()
        )
        self._tau_cache: dict[tuple[int, int, int], float] = {}

    def periods_in(self, first_day: int, last_day: int) -> list[tuple[int, int]]:
        return [
            (day, hour)
            for day in range(first_day, last_day + 1)
            for hour in range(24)
            if (day, hour) in self.by_period
        ]

    def tau_hat(self, day: int, hour: int, m: int, fallback: float | None) -> float:
        key = (m, day, hour)
        hit = self._tau_cache.get(key)
        if hit is None:
            # target day-1: the window [day-1-m, day-2] respects the settlement lag
            hit = self.estimator.forecast(day - 1, hour, m, fallback_tau=fallback)
            self._tau_cache[key] = hit
        return hit


def _strategy_offer(
    strategy: str,
    rec: MarketRecord,
    tau_hat: float | None,
    params: Mapping[str, float],
) -> float:
    if strategy == "oracle":
        return rec.omega_star
    if strategy == "bn":
        return solve_direct(rec.forecast, tau_hat).y_star
    if strategy == "dr_omega":
        return solve_dr_omega(rec.forecast, tau_hat, params["rho"]).y_star
    if strategy == "dr_s_uniform":
        ball = make_bernoulli_ball(tau_hat, params["epsilon"], BallKind.UNIFORM)
        return solve_dr_s(rec.forecast, ball).y_star
    if strategy == "dr_s_level_adjusted":
        ball = make_bernoulli_ball(
            tau_hat, params["epsilon"], BallKind.LEVEL_ADJUSTED, theta=params["theta"]
        )
        return solve_dr_s(rec.forecast, ball).y_star
    if strategy == "robust_s":
        return solve_robust_s(rec.forecast).y_star
    if strategy == "robust_omega":
        return solve_robust_omega(tau_hat).y_star
    raise ValueError(f"unknown strategy {strategy!r}")


def _offer_for(frame: _MarketFrame, plan: BacktestPlan, strategy: str,
               params: Mapping[str, float], day: int, hour: int) -> float:
    rec = frame.by_period[(day, hour)]
    tau = None
    if strategy in _TAU_STRATEGIES:
        tau = frame.tau_hat(day, hour, int(params["m"]), plan.fallback_tau)
    return _strategy_offer(strategy, rec, tau, params)


def _span_revenue(frame: _MarketFrame, plan: BacktestPlan, strategy: str,
                  params: Mapping[str, float], first_day: int, last_day: int) -> float:
    total = 0.0
    for day, hour in frame.periods_in(first_day, last_day):
        rec = frame.by_period[(day, hour)]
        y = _offer_for(frame, plan, strategy, params, day, hour)
        total += revenue(SettlementInput(rec.pi_s, rec.pi_b, rec.s_l, y, rec.omega_star))
    return total


def _select_on_window(frame: _MarketFrame, plan: BacktestPlan,
                      first_day: int, last_day: int, threads: int) -> dict[str, dict]:
    chosen: dict[str, dict] = {}
    for strategy in plan.strategies:
        grid = _param_grid(strategy, plan)
        if threads > 1 and len(grid) > 1:
            # tau lookups are cached per frame; prime them serially so the
            # pool workers only read
            for day, hour in frame.periods_in(first_day, last_day):
                if strategy in _TAU_STRATEGIES:
                    for m in {int(p["m"]) for p in grid}:
                        frame.tau_hat(day, hour, m, plan.fallback_tau)
            with ThreadPoolExecutor(max_workers=threads) as pool:
                totals = list(pool.map(
                    lambda p: _span_revenue(frame, plan, strategy, p, first_day, last_day),
                    grid,
                ))
        else:
            totals = [
                _span_revenue(frame, plan, strategy, params, first_day, last_day)
                for params in grid
            ]
        best = int(np.argmax(totals))  # ties keep the earliest grid point
        chosen[strategy] = dict(grid[best])
    return chosen


def cross_validate(records: Sequence[MarketRecord], plan: BacktestPlan,
                   threads: int = 1) -> ChosenParameters:
    """Pick each strategy's parameters by total revenue on the CV window.

    Fixed-window mode evaluates the single window at the end of the warm
    start. Sliding mode re-selects for every evaluation day on the trailing
    window of the same length, ending at day-2 so the selection only sees
    outcomes already settled at the day's gate closure. Grid points may
    evaluate in parallel; results do not depend on ``threads``.
    """
    frame = _MarketFrame(records)
    if frame.n_days < plan.warm_start_days:
        raise ValueError(
            f"insufficient history: {frame.n_days} days < warm start {plan.warm_start_days}"
        )
    cv_first = plan.tau_window_days + 1
    cv_last = plan.warm_start_days
    if plan.cv_mode is CvMode.FIXED_WINDOW:
        return ChosenParameters(
            mode=CvMode.FIXED_WINDOW,
            static=_select_on_window(frame, plan, cv_first, cv_last, threads),
        )
    per_day: dict[int, dict] = {}
    for day in range(plan.warm_start_days + 1, frame.n_days + 1):
        per_day[day] = _select_on_window(frame, plan, day - 1 - plan.cv_days, day - 2, threads)
    return ChosenParameters(mode=CvMode.SLIDING, per_day=per_day)


def offers_for_day(records: Sequence[MarketRecord], plan: BacktestPlan,
                   chosen: ChosenParameters, day: int) -> dict[str, dict[int, float]]:
    """The offers fixed at day ``day``'s gate closure, per strategy and hour.

    Everything except the day's own forecast (and, for the oracle
    benchmark, its realization) derives from records settled through day
    ``day - 2``.
    """
    frame = _MarketFrame(records)
    out: dict[str, dict[int, float]] = {}
    for strategy in plan.strategies:
        params = chosen.params_for(strategy, day)
        out[strategy] = {
            hour: _offer_for(frame, plan, strategy, params, day, hour)
            for d, hour in frame.periods_in(day, day)
            if d == day
        }
    return out


def run_backtest(records: Sequence[MarketRecord], plan: BacktestPlan,
                 chosen: ChosenParameters) -> BacktestReport:
    """Settle every out-of-sample hour and aggregate the report."""
    frame = _MarketFrame(records)
    first_eval = plan.warm_start_days + 1
    if frame.n_days < first_eval:
        raise ValueError("no evaluation days after the warm start")
    periods = frame.periods_in(first_eval, frame.n_days)
    if not periods:
        raise ValueError("evaluation span holds no records")

    timestamps = tuple(frame.by_period[p].timestamp for p in periods)
    volumes = np.array([frame.by_period[p].omega_star for p in periods])
    oracle_rev = np.array([
        revenue(SettlementInput(r.pi_s, r.pi_b, r.s_l, r.omega_star, r.omega_star))
        for r in (frame.by_period[p] for p in periods)
    ])

    revenues: dict[str, np.ndarray] = {}
    for strategy in plan.strategies:
        series = np.empty(len(periods))
        for i, (day, hour) in enumerate(periods):
            rec = frame.by_period[(day, hour)]
            params = chosen.params_for(strategy, day)
            y = _offer_for(frame, plan, strategy, params, day, hour)
            series[i] = revenue(SettlementInput(rec.pi_s, rec.pi_b, rec.s_l, y, rec.omega_star))
        revenues[strategy] = series

    reference = "bn" if "bn" in plan.strategies else None
    rows = regret_and_ratio(revenues, oracle_rev, volumes, reference=reference)
    return BacktestReport(
        timestamps=timestamps,
        volumes=volumes,
        oracle_revenues=oracle_rev,
        revenues=revenues,
        rows=rows,
        chosen=chosen,
        eval_days=(first_eval, frame.n_days),
    )


def scale_penalties(records: Sequence[MarketRecord], factor: float) -> list[MarketRecord]:
    """Scale every balancing-price spread away from the day-ahead price."""
    if factor <= 0.0:
        raise ValueError(f"scale factor must be positive, got {factor}")
    if factor == 1.0:
        return list(records)
    return [
        replace(rec, pi_b=rec.pi_s + factor * (rec.pi_b - rec.pi_s))
        for rec in records
    ]


# ---------- file interfaces ----------


def load_market_data(market_csv, forecast_dir, strict: bool = False) -> list[MarketRecord]:
    """Read the hourly market CSV and resolve one forecast file per record.

    Schema violations raise with the offending row and column named. Gaps
    in the hourly grid warn, or raise when ``strict`` is set.
    """
    market_csv = Path(market_csv)
    forecast_dir = Path(forecast_dir)
    records: list[MarketRecord] = []
    forecast_cache: dict[str, PiecewiseLinear] = {}
    with market_csv.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{market_csv}: empty file")
        if tuple(h.strip() for h in header) != MARKET_HEADER:
            raise ValueError(
                f"{market_csv}: expected header {','.join(MARKET_HEADER)}, got {header!r}"
            )
        prev_ts: datetime | None = None
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(MARKET_HEADER):
                raise ValueError(f"{market_csv}:{lineno}: expected {len(MARKET_HEADER)} columns")
            try:
                ts = datetime.fromisoformat(row[0].strip())
            except ValueError as exc:
                raise ValueError(f"{market_csv}:{lineno}: column 'timestamp': {exc}") from exc
            if ts.minute or ts.second or ts.microsecond:
                raise ValueError(f"{market_csv}:{lineno}: column 'timestamp': not on the hour")
            floats = []
            for col, cell in zip(MARKET_HEADER[1:], row[1:]):
                try:
                    floats.append(float(cell))
                except ValueError as exc:
                    raise ValueError(
                        f"{market_csv}:{lineno}: column {col!r}: non-numeric {cell!r}"
                    ) from exc
            pi_s, pi_b, s_l, omega = floats
            if not (0.0 <= omega <= 1.0):
                raise ValueError(
                    f"{market_csv}:{lineno}: column 'omega_star': {omega} outside [0, 1]"
                )
            if prev_ts is not None:
                if ts <= prev_ts:
                    raise ValueError(f"{market_csv}:{lineno}: timestamps must be strictly increasing")
                gap = int((ts - prev_ts).total_seconds() // 3600) - 1
                if gap > 0:
                    msg = f"{market_csv}:{lineno}: {gap} missing hour(s) before {ts.isoformat()}"
                    if strict:
                        raise ValueError(msg)
                    warnings.warn(msg)
            prev_ts = ts
            fname = ts.strftime(_TS_FORMAT) + ".csv"
            fpath = forecast_dir / fname
            if not fpath.exists():
                raise ValueError(f"{market_csv}:{lineno}: forecast file {fpath} not found")
            forecast = forecast_cache.get(fname)
            if forecast is None:
                forecast = read_quantile_forecast(fpath)
                forecast_cache[fname] = forecast
            records.append(MarketRecord(ts, pi_s, pi_b, s_l, omega, forecast))
    if not records:
        raise ValueError(f"{market_csv}: no data rows")
    return records


def write_market_csv(records: Iterable[MarketRecord], path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MARKET_HEADER)
        for rec in records:
            writer.writerow([
                rec.timestamp.isoformat(),
                repr(float(rec.pi_s)), repr(float(rec.pi_b)),
                repr(float(rec.s_l)), repr(float(rec.omega_star)),
            ])


def write_forecast_dir(records: Iterable[MarketRecord], dirpath) -> None:
    """One ``level,value`` file per delivery hour, named by its timestamp."""
    dirpath = Path(dirpath)
    dirpath.mkdir(parents=True, exist_ok=True)
    for rec in records:
        if not isinstance(rec.forecast, PiecewiseLinear):
            raise ValueError(
                f"{rec.timestamp.isoformat()}: only quantile forecasts can be written to disk"
            )
        write_quantile_forecast(rec.forecast, dirpath / (rec.timestamp.strftime(_TS_FORMAT) + ".csv"))


_REFERENCE_NOTE = (
    "Aggregate results are specific to the supplied market data; figures obtained "
    "on proprietary datasets elsewhere are not reproducible from this tool and are "
    "never used as test oracles."
)


def report_summary(report: BacktestReport) -> dict:
    """JSON-ready aggregate view of a backtest report."""
    return {
        "eval_days": list(report.eval_days),
        "n_periods": len(report.timestamps),
        "total_volume_mwh": float(report.volumes.sum()),
        "strategies": {
            name: {
                "revenue_per_mwh": row.revenue_per_mwh,
                "regret_per_mwh": row.regret_per_mwh,
                "advantage_ratio_pct": row.advantage_ratio_pct,
                "total_revenue": row.total_revenue,
                "final_cum_delta_regret": float(row.cum_delta_regret[-1]),
            }
            for name, row in sorted(report.rows.items())
        },
        "chosen_parameters": report.chosen.to_json_dict(),
        "reference_note": _REFERENCE_NOTE,
    }


def write_report_json(report: BacktestReport, path) -> None:
    Path(path).write_text(json.dumps(report_summary(report), indent=2, sort_keys=True) + "\n")


def report_csv_rows(report: BacktestReport) -> list[tuple[str, str, str, str, str]]:
    """Per-period rows: timestamp,strategy,revenue,regret,cum_delta_regret."""
    rows = []
    for name in sorted(report.revenues):
        rev = report.revenues[name]
        cum = report.rows[name].cum_delta_regret
        for i, ts in enumerate(report.timestamps):
            rows.append((
                ts.isoformat(), name,
                repr(float(rev[i])),
                repr(float(report.oracle_revenues[i] - rev[i])),
                repr(float(cum[i])),
            ))
    return rows


def write_report_csv(report: BacktestReport, path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp", "strategy", "revenue", "regret", "cum_delta_regret"])
        writer.writerows(report_csv_rows(report))
