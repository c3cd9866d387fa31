"""Command-line front end: solvers, deformation curves, sweeps and backtests.

Every command accepts ``--seed`` and ``--output {json,csv}``, writes its
artifact atomically (temp file + rename) to ``--out`` and prints a
one-line summary. Usage errors exit 2; data and domain errors exit 1 with
a structured message on stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from datetime import datetime
from pathlib import Path

import numpy as np

from . import backtest as bt
from . import montecarlo as mc
from .ambiguity import BallKind, deform_lower, deform_upper, make_bernoulli_ball
from .distributions import Beta, Heaviside, Uniform01, UnitDistribution, read_quantile_forecast
from .solvers import (
    solve_direct,
    solve_dr_omega,
    solve_dr_s,
    solve_robust_omega,
    solve_robust_s,
)
from .synthetic import make_synthetic_market

__all__ = ["main", "dispatch"]

_BALL_BY_FLAG = {"uniform": BallKind.UNIFORM, "level-adjusted": BallKind.LEVEL_ADJUSTED}
_STRATEGY_BY_FLAG = {
    "direct": "bn",
    "dr-omega": "dr_omega",
    "dr-s": "dr_s",
    "robust-s": "robust_s",
    "robust-omega": "robust_omega",
}


def _jsonify(obj):
    if isinstance(obj, dict):
        return {k: _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonify(v) for v in obj.tolist()]
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


def _atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    parent = path.parent if str(path.parent) else Path(".")
    parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=str(parent), prefix=".tmp-", suffix=path.suffix)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_json(path: Path, payload: dict) -> None:
    _atomic_write(path, json.dumps(_jsonify(payload), indent=2, sort_keys=True) + "\n")


def _write_csv(path: Path, header: list[str], rows: list) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(header)
    writer.writerows(rows)
    _atomic_write(path, buf.getvalue())


def _parse_dist(spec: str) -> UnitDistribution:
    """Parametric distribution specs: beta:2,6 | uniform | heaviside:0.4."""
    name, _, rest = spec.partition(":")
    name = name.strip().lower()
    if name == "uniform":
        return Uniform01()
    if name == "beta":
        parts = [p for p in rest.split(",") if p.strip()]
        if len(parts) != 2:
            raise ValueError(f"beta spec needs two parameters, got {spec!r}")
        return Beta(float(parts[0]), float(parts[1]))
    if name == "heaviside":
        if not rest.strip():
            raise ValueError(f"heaviside spec needs a location, got {spec!r}")
        return Heaviside(float(rest))
    raise ValueError(f"unknown distribution spec {spec!r}")


def _parse_grid(spec: str) -> tuple[float, ...]:
    """Grids as start:step:stop ranges or comma lists."""
    spec = spec.strip()
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise ValueError(f"range grid must be start:step:stop, got {spec!r}")
        start, step, stop = (float(p) for p in parts)
        if step <= 0.0 or stop < start:
            raise ValueError(f"bad grid range {spec!r}")
        n = int(round((stop - start) / step))
        return tuple(float(v) for v in np.round(np.linspace(start, start + n * step, n + 1), 12))
    return tuple(float(p) for p in spec.split(",") if p.strip())


def _dist_from_args(args) -> UnitDistribution:
    if getattr(args, "forecast", None):
        return read_quantile_forecast(args.forecast)
    if getattr(args, "dist", None):
        return _parse_dist(args.dist)
    raise ValueError("supply --dist or --forecast")


def _apply_config(argv: list[str]) -> list[str]:
    """Expand a --config key=value file into flags after the subcommand.

    Explicit command-line flags still win because they come later and
    argparse keeps the last occurrence.
    """
    if "--config" not in argv:
        return argv
    idx = argv.index("--config")
    if idx + 1 >= len(argv):
        raise ValueError("--config needs a file path")
    path = Path(argv[idx + 1])
    rest = argv[:idx] + argv[idx + 2:]
    if not rest:
        raise ValueError("--config requires a subcommand")
    tokens: list[str] = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"{path}:{lineno}: expected key = value")
        flag = "--" + key.strip().replace("_", "-")
        value = value.strip()
        if value.lower() in ("true", "false"):
            if value.lower() == "true":
                tokens.append(flag)
        else:
            tokens.extend([flag, value])
    return [rest[0], *tokens, *rest[1:]]


def _add_common(parser: argparse.ArgumentParser, default_out: str) -> None:
    parser.add_argument("--seed", type=int, default=0, help="master seed")
    parser.add_argument("--output", choices=("json", "csv"), default="json")
    parser.add_argument("--out", default=default_out, help="artifact path")


# ---------- command handlers ----------


def _cmd_solve(args) -> int:
    dist = _dist_from_args(args)
    strategy = _STRATEGY_BY_FLAG[args.strategy]
    if strategy == "robust_s":
        decision = solve_robust_s(dist)
    else:
        if args.tau is None:
            raise ValueError(f"--tau is required for strategy {args.strategy}")
        if strategy == "bn":
            decision = solve_direct(dist, args.tau)
        elif strategy == "dr_omega":
            if args.rho is None:
                raise ValueError("--rho is required for dr-omega")
            decision = solve_dr_omega(dist, args.tau, args.rho)
        elif strategy == "dr_s":
            if args.eps is None:
                raise ValueError("--eps is required for dr-s")
            kind = _BALL_BY_FLAG[args.ball]
            theta = args.theta if kind is BallKind.LEVEL_ADJUSTED else None
            ball = make_bernoulli_ball(args.tau, args.eps, kind, theta=theta)
            decision = solve_dr_s(dist, ball)
        else:
            decision = solve_robust_omega(args.tau)
    payload = {
        "command": "solve",
        "strategy": args.strategy,
        "y_star": decision.y_star,
        "method": decision.method.value,
        "diagnostics": dict(decision.diagnostics),
        "seed": args.seed,
    }
    if args.output == "json":
        _write_json(Path(args.out), payload)
    else:
        rows = [("y_star", repr(decision.y_star)), ("method", decision.method.value)]
        rows += sorted((k, repr(v) if isinstance(v, float) else str(v))
                       for k, v in decision.diagnostics.items())
        _write_csv(Path(args.out), ["key", "value"], rows)
    print(f"y*={decision.y_star:.6f} ({decision.method.value}) -> {args.out}")
    return 0


def _cmd_deform(args) -> int:
    dist = _dist_from_args(args)
    upper = deform_upper(dist, args.rho)
    lower = deform_lower(dist, args.rho)
    xs = np.round(np.arange(0.0, 1.0 + args.grid_step / 2, args.grid_step), 12)
    ref = np.asarray(dist.cdf(xs), dtype=float)
    up = np.asarray(upper.cdf(xs), dtype=float)
    lo = np.asarray(lower.cdf(xs), dtype=float)
    if args.output == "json":
        _write_json(Path(args.out), {
            "command": "deform", "rho": args.rho, "seed": args.seed,
            "x": xs, "reference": ref, "upper": up, "lower": lo,
        })
    else:
        rows = [(repr(float(a)), repr(float(b)), repr(float(c)), repr(float(d)))
                for a, b, c, d in zip(xs, ref, up, lo)]
        _write_csv(Path(args.out), ["x", "reference", "upper", "lower"], rows)
    print(f"deformation band at rho={args.rho:g} over {xs.size} points -> {args.out}")
    return 0


def _sim_config(args, m: int) -> mc.SimConfig:
    kinds = ("uniform", "level_adjusted") if args.ball == "both" else (
        args.ball.replace("-", "_"),
    )
    return mc.SimConfig(
        true_dist=_dist_from_args(args),
        true_tau=args.tau,
        m=m,
        n_replicates=args.n,
        epsilon_grid=_parse_grid(args.eps_grid),
        theta=args.theta,
        ball_kinds=kinds,
        master_seed=args.seed,
        threads=args.threads,
    )


def _cmd_simulate(args) -> int:
    config = _sim_config(args, args.m)
    result = mc.run_epsilon_sweep(config)
    if args.output == "json":
        _write_json(Path(args.out), mc.sweep_summary(result, config))
    else:
        _write_csv(Path(args.out), ["epsilon", "arm", "expected_loss"], mc.sweep_csv_rows(result))
    g_u = "n/a" if result.gamma_u is None else f"{result.gamma_u:.4f}"
    g_la = "n/a" if result.gamma_la is None else f"{result.gamma_la:.4f}"
    print(
        f"gamma_u={g_u} gamma_la={g_la} "
        f"(m={args.m}, n={args.n}, {result.runtime_seconds:.2f}s) -> {args.out}"
    )
    return 0


def _cmd_msweep(args) -> int:
    config = _sim_config(args, max(args.m_min, 1))
    m_values = list(range(args.m_min, args.m_max + 1, args.m_step))
    result = mc.run_m_sweep(config, m_values)
    if args.output == "json":
        _write_json(Path(args.out), {
            "command": "msweep", "seed": args.seed,
            "m_values": result.m_values,
            "gamma_u": result.gamma_u, "gamma_la": result.gamma_la,
            "gamma_u_se": result.gamma_u_se, "gamma_la_se": result.gamma_la_se,
            "n_replicates": result.n_replicates,
        })
    else:
        rows = []
        for i, m in enumerate(result.m_values):
            rows.append((str(int(m)), "uniform", repr(float(result.gamma_u[i])),
                         repr(float(result.gamma_u_se[i]))))
            rows.append((str(int(m)), "level_adjusted", repr(float(result.gamma_la[i])),
                         repr(float(result.gamma_la_se[i]))))
        _write_csv(Path(args.out), ["m", "ball", "gamma", "gamma_se"], rows)
    print(
        f"m-sweep over {result.m_values.size} sizes "
        f"({result.runtime_seconds:.2f}s) -> {args.out}"
    )
    return 0


def _plan_from_args(args) -> bt.BacktestPlan:
    return bt.BacktestPlan(
        warm_start_days=args.warm_start_days,
        tau_window_days=args.tau_window_days,
        cv_days=args.cv_days,
        cv_mode=bt.CvMode(args.cv_mode),
        m_grid=tuple(int(v) for v in _parse_grid(args.m_grid)),
        rho_grid=_parse_grid(args.rho_grid),
        epsilon_grid=_parse_grid(args.eps_grid),
        theta_grid=_parse_grid(args.theta_grid),
        strategies=tuple(s.strip() for s in args.strategies.split(",") if s.strip()),
        fallback_tau=args.fallback_tau,
    )


def _add_backtest_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--market", required=True, help="hourly market CSV")
    parser.add_argument("--forecasts", required=True, help="forecast directory")
    parser.add_argument("--strict", action="store_true", help="fail on hourly gaps")
    parser.add_argument("--warm-start-days", type=int, default=131)
    parser.add_argument("--tau-window-days", type=int, default=91)
    parser.add_argument("--cv-days", type=int, default=40)
    parser.add_argument("--cv-mode", choices=("fixed_window", "sliding"), default="fixed_window")
    parser.add_argument("--m-grid", default="90")
    parser.add_argument("--rho-grid", default="0,0.05,0.1,0.15,0.2,0.25,0.3")
    parser.add_argument("--eps-grid", default="0,0.025,0.05,0.075,0.1,0.15,0.2,0.25")
    parser.add_argument("--theta-grid", default="0.5,0.9")
    parser.add_argument(
        "--strategies",
        default="oracle,bn,dr_omega,dr_s_uniform,dr_s_level_adjusted,robust_s",
    )
    parser.add_argument("--fallback-tau", type=float, default=None)
    parser.add_argument("--penalty-scale", type=float, default=1.0)
    parser.add_argument("--threads", type=int, default=1,
                        help="parallel grid evaluation; never changes results")


def _load_backtest_inputs(args):
    records = bt.load_market_data(args.market, args.forecasts, strict=args.strict)
    if args.penalty_scale != 1.0:
        records = bt.scale_penalties(records, args.penalty_scale)
    return records, _plan_from_args(args)


def _cmd_crossval(args) -> int:
    records, plan = _load_backtest_inputs(args)
    chosen = bt.cross_validate(records, plan, threads=args.threads)
    if args.output == "json":
        _write_json(Path(args.out), {"command": "crossval", "seed": args.seed,
                                     **chosen.to_json_dict()})
    else:
        rows = []
        if chosen.mode is bt.CvMode.FIXED_WINDOW:
            for strat, params in sorted(chosen.static.items()):
                for key, val in sorted(params.items()):
                    rows.append(("-", strat, key, repr(float(val))))
        else:
            for day, strats in sorted(chosen.per_day.items()):
                for strat, params in sorted(strats.items()):
                    for key, val in sorted(params.items()):
                        rows.append((str(day), strat, key, repr(float(val))))
        _write_csv(Path(args.out), ["day", "strategy", "param", "value"], rows)
    print(f"cross-validation ({chosen.mode.value}) -> {args.out}")
    return 0


def _cmd_backtest(args) -> int:
    records, plan = _load_backtest_inputs(args)
    if args.params:
        chosen = bt.ChosenParameters.from_json_dict(json.loads(Path(args.params).read_text()))
    else:
        chosen = bt.cross_validate(records, plan, threads=args.threads)
    report = bt.run_backtest(records, plan, chosen)
    if args.output == "json":
        _write_json(Path(args.out), {"command": "backtest", "seed": args.seed,
                                     **bt.report_summary(report)})
    else:
        _write_csv(
            Path(args.out),
            ["timestamp", "strategy", "revenue", "regret", "cum_delta_regret"],
            bt.report_csv_rows(report),
        )
    summary = " ".join(
        f"{name}:r={row.regret_per_mwh:.3f}" for name, row in sorted(report.rows.items())
    )
    print(f"backtest over {len(report.timestamps)} periods [{summary}] -> {args.out}")
    return 0


def _cmd_synth(args) -> int:
    records = make_synthetic_market(
        n_days=args.days,
        master_seed=args.seed,
        tau=args.tau,
        mean_rel_spread=args.spread,
        no_balancing_rate=args.no_balancing_rate,
        start=datetime.fromisoformat(args.start),
    )
    bt.write_market_csv(records, args.market_out)
    bt.write_forecast_dir(records, args.forecasts_out)
    payload = {
        "command": "synth", "seed": args.seed, "days": args.days,
        "records": len(records), "tau": args.tau,
        "market": str(args.market_out), "forecasts": str(args.forecasts_out),
    }
    if args.output == "json":
        _write_json(Path(args.out), payload)
    else:
        _write_csv(Path(args.out), ["key", "value"], sorted(
            (k, str(v)) for k, v in payload.items()
        ))
    print(f"synthetic market: {len(records)} records over {args.days} days -> {args.market_out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="drnewsvendor",
        description="Bernoulli newsvendor offers, robust variants, sweeps and backtests",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="compute one offer")
    p.add_argument("--strategy", required=True, choices=sorted(_STRATEGY_BY_FLAG))
    p.add_argument("--dist", help="parametric spec, e.g. beta:2,6")
    p.add_argument("--forecast", help="quantile forecast CSV")
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--rho", type=float, default=None)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--ball", choices=sorted(_BALL_BY_FLAG), default="uniform")
    p.add_argument("--theta", type=float, default=None)
    _add_common(p, "solve.json")
    p.set_defaults(handler=_cmd_solve)

    p = sub.add_parser("deform", help="tabulate a deformation band")
    p.add_argument("--dist", help="parametric spec")
    p.add_argument("--forecast", help="quantile forecast CSV")
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--grid-step", type=float, default=0.01)
    _add_common(p, "deform.json")
    p.set_defaults(handler=_cmd_deform)

    p = sub.add_parser("simulate", help="estimation-noise sweep over ball radii")
    p.add_argument("--dist", help="true distribution spec")
    p.add_argument("--forecast", help="true distribution from a forecast CSV")
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", type=int, default=1_000_000)
    p.add_argument("--theta", type=float, default=0.9)
    p.add_argument("--eps-grid", default="0:0.01:1")
    p.add_argument("--ball", choices=("uniform", "level-adjusted", "both"), default="both")
    p.add_argument("--threads", type=int, default=1)
    _add_common(p, "simulate.json")
    p.set_defaults(handler=_cmd_simulate)

    p = sub.add_parser("msweep", help="gamma versus estimation sample size")
    p.add_argument("--dist", help="true distribution spec")
    p.add_argument("--forecast", help="true distribution from a forecast CSV")
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--m-min", type=int, default=1)
    p.add_argument("--m-max", type=int, default=75)
    p.add_argument("--m-step", type=int, default=1)
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--theta", type=float, default=0.9)
    p.add_argument("--eps-grid", default="0:0.01:1")
    p.add_argument("--ball", choices=("uniform", "level-adjusted", "both"), default="both")
    p.add_argument("--threads", type=int, default=1)
    _add_common(p, "msweep.json")
    p.set_defaults(handler=_cmd_msweep)

    p = sub.add_parser("crossval", help="select strategy parameters on the CV window")
    _add_backtest_flags(p)
    _add_common(p, "crossval.json")
    p.set_defaults(handler=_cmd_crossval)

    p = sub.add_parser("backtest", help="run the out-of-sample evaluation")
    _add_backtest_flags(p)
    p.add_argument("--params", default=None, help="chosen-parameters JSON from crossval")
    _add_common(p, "backtest.json")
    p.set_defaults(handler=_cmd_backtest)

    p = sub.add_parser("synth", help="generate synthetic market data files")
    p.add_argument("--days", type=int, default=731)
    p.add_argument("--tau", type=float, default=0.75)
    p.add_argument("--spread", type=float, default=0.135)
    p.add_argument("--no-balancing-rate", type=float, default=0.05)
    p.add_argument("--start", default="2018-10-01T00:00:00")
    p.add_argument("--market-out", default="market.csv")
    p.add_argument("--forecasts-out", default="forecasts")
    _add_common(p, "synth.json")
    p.set_defaults(handler=_cmd_synth)

    return parser


def dispatch(argv: list[str] | None = None) -> int:
    """Parse and run; returns the exit status."""
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        argv = _apply_config(argv)
    except (OSError, ValueError) as exc:
        print(json.dumps({"error": str(exc)}), file=sys.stderr)
        return 1
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except (ValueError, OSError, KeyError) as exc:
        print(json.dumps({"error": str(exc)}), file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch())
