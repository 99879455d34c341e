"""Command-line interface.

Every command writes its resolved configuration to ``<out>/config.json``;
passing that file back through ``--config`` reproduces the run. Explicit
flags override values from the config file.

Exit codes: 0 success, 1 verification failure, 2 usage or configuration
error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import ensemble as ens
from .model import BiasSchedule, ParameterError, WalkParams
from .regimes import classify_regime, measure_regime, moment_predictions
from .sampler import simulate
from .sequences import build_tables
from .stats import exponent_regression, normality_report
from .verify import SUITES, oracle_discrepancy

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class ConfigError(Exception):
    pass


# ----------------------------------------------------------------------------
# helpers
# ----------------------------------------------------------------------------


def _params(args) -> WalkParams:
    if args.alpha is None:
        raise ConfigError("--alpha is required")
    if args.eps is not None and args.gamma is not None:
        raise ParameterError("--eps and --gamma are mutually exclusive")
    if args.gamma is not None:
        sched = BiasSchedule.power_law(args.gamma)
    elif args.eps is not None:
        sched = BiasSchedule.constant(args.eps)
    else:
        sched = BiasSchedule.zero()
    return WalkParams(args.alpha, args.beta, sched)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _resolved(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "config")}


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o).__name__}")


def _write_csv(path: Path, rows: list[dict], columns: list[str] | None = None) -> None:
    columns = columns or (list(rows[0]) if rows else [])
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt(r[k]) for k in columns})


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return x


def parse_grid(text: str) -> list[float]:
    """``"a,b,c"`` or ``"start:stop:step"`` (inclusive stop)."""
    try:
        if ":" in text:
            start, stop, step = (float(t) for t in text.split(":"))
            if step <= 0 or stop < start:
                raise ValueError
            k = int(math.floor((stop - start) / step + 1e-9))
            return [round(start + i * step, 12) for i in range(k + 1)]
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ConfigError(f"bad grid {text!r}") from None
    if not vals:
        raise ConfigError(f"empty grid {text!r}")
    return vals


def _checkpoints(args, n: int) -> np.ndarray:
    if getattr(args, "every", False):
        return np.arange(1, n + 1)
    return ens.geometric_grid(n)


# ----------------------------------------------------------------------------
# commands
# ----------------------------------------------------------------------------


def cmd_moments(args) -> int:
    p = _params(args)
    n = args.n
    tables = build_tables(p, n)
    try:
        pred = moment_predictions(p, tables)
    except ParameterError:
        pred = None
    ck = _checkpoints(args, n)
    a = np.exp(tables.log_a[ck])
    rows = []
    for i, k in enumerate(ck):
        row = {
            "n": int(k),
            "a_n": a[i],
            "mean": tables.mean[k],
            "var": tables.variance[k],
            "step_var": tables.step_var[k],
        }
        if pred is not None and k > 1:
            ms, vs = float(pred.mean_scale(k)), float(pred.var_scale(k))
            row.update(mean_ratio=tables.mean[k] / ms, mean_limit=pred.mean_limit)
            row.update(var_ratio=tables.variance[k] / vs, var_limit=pred.var_limit)
        else:
            row.update(mean_ratio=math.nan, mean_limit=math.nan, var_ratio=math.nan, var_limit=math.nan)
        rows.append(row)
    out = _out_dir(args)
    _write_csv(out / "moments.csv", rows)
    meta = {"predictions": None if pred is None else vars(pred)}
    if p.schedule.kind == "power" and p.alpha < 1:
        meta["regime"] = classify_regime(p.alpha, p.schedule.gamma, p.beta).to_dict()
    _write_json(out / "predictions.json", meta)
    return EXIT_OK


def cmd_simulate(args) -> int:
    p = _params(args)
    traj = simulate(p, args.n, _checkpoints(args, args.n), args.seed, args.index)
    rows = [{"n": int(k), "S_n": int(s)} for k, s in zip(traj.checkpoints, traj.positions)]
    _write_csv(_out_dir(args) / "trajectory.csv", rows)
    return EXIT_OK


def cmd_ensemble(args) -> int:
    p = _params(args)
    res = ens.run_ensemble(p, args.n, ens.geometric_grid(args.n), args.m, args.seed, args.workers)
    _write_csv(_out_dir(args) / "ensemble.csv", res.stats.rows())
    return EXIT_OK


def cmd_fluctuation(args) -> int:
    p = _params(args)
    f = ens.supercritical_fluctuation(p, args.n, args.N, args.m, args.seed, args.workers)
    out = _out_dir(args)
    summary = {
        "n": f.n,
        "N": f.N,
        "sigma_exact": f.sigma,
        "sigma_asymptotic": f.sigma_asymptotic,
        "sigma_ratio": f.sigma_ratio,
        "predicted_ratio": f.predicted_ratio,
        "normality": normality_report(f.t_values).to_dict(),
    }
    _write_json(out / "fluctuation.json", summary)
    if args.samples_format == "bin":
        np.asarray(f.t_values, dtype="<f8").tofile(out / "t_values.f64")
    else:
        _write_csv(
            out / "t_values.csv",
            [{"index": i, "S_n": int(a), "S_N": int(b), "t": t} for i, (a, b, t) in enumerate(zip(f.s_n, f.s_N, f.t_values))],
        )
    return EXIT_OK


SUITE_FLAGS = {
    "exact": (),
    "phase": ("n",),
    "lil": ("n",),
    "diffusive": ("params", "n", "m", "seed"),
    "critical": ("params", "n", "m", "seed"),
    "supercritical": ("params", "n", "N", "m", "seed"),
    "w-moments": ("params", "N", "m", "seed"),
    "decaying-bias": ("params", "N", "m", "seed"),
}


def _suite_kwargs(name: str, args) -> dict:
    given = {k: getattr(args, k) for k in ("n", "N", "m", "seed") if getattr(args, k) is not None}
    if args.alpha is not None:
        given["params"] = _params(args)
    extra = set(given) - set(SUITE_FLAGS[name])
    if extra:
        flags = ", ".join("--alpha" if k == "params" else f"--{k}" for k in sorted(extra))
        raise ConfigError(f"suite {name} does not take {flags}")
    kw = {"scale": args.tolerance_scale, **given}
    if name == "lil" and "n" in kw:
        kw["n_max"] = kw.pop("n")
    if name != "exact" and name != "phase":
        kw["workers"] = args.workers
    return kw


def cmd_verify(args) -> int:
    names = list(SUITES) if args.suite == "all" else [args.suite]
    if args.alpha is None and (args.eps is not None or args.gamma is not None or args.beta != 0.0):
        raise ConfigError("--beta/--eps/--gamma need --alpha in verify")
    for name in names:
        _suite_kwargs(name, args)  # reject bad flags before any long run
    reports = []
    for name in names:
        reports.append(SUITES[name](**_suite_kwargs(name, args)).to_dict())
    passed = all(r["passed"] for r in reports)
    _write_json(_out_dir(args) / "verdict.json", {"passed": passed, "suites": reports})
    for r in reports:
        print(f"{r['suite']}: {'PASS' if r['passed'] else 'FAIL'}")
    return EXIT_OK if passed else EXIT_FAIL


def phase_row(alpha, gamma, beta, n):
    """Predicted versus recursion-measured scaling for one phase-table cell.

    ``second`` is the variance for Normal limits, the L2 distance to the
    constant for L2-constant limits and ``E[W_hat^2]`` for random limits.
    """
    rep = classify_regime(alpha, gamma, beta, second_moment=alpha > 0.5)
    tables = build_tables(WalkParams(alpha, beta, BiasSchedule.power_law(gamma)), n)
    meas = measure_regime(rep, tables, n)
    grid = ens.geometric_grid(n)
    grid = grid[grid >= 10]
    if rep.limit_kind == "Normal":
        # fluctuation scale: half the variance exponent
        measured_exp = exponent_regression(grid, tables.variance[grid]).slope / 2.0
    else:
        measured_exp = exponent_regression(grid, tables.mean[grid]).slope
    pred_second = 0.0 if rep.limit_kind == "L2-constant" else rep.predicted_second
    return {
        "alpha": alpha,
        "gamma": gamma,
        "regime": rep.regime,
        "normalization": rep.normalization,
        "limit_kind": rep.limit_kind,
        "predicted_exponent": rep.exponent,
        "measured_exponent": measured_exp,
        "exponent_deviation": abs(measured_exp - rep.exponent),
        "predicted_mean": rep.predicted_mean,
        "measured_mean": meas["mean"],
        "mean_deviation": abs(meas["mean"] - rep.predicted_mean),
        "predicted_second": pred_second,
        "measured_second": meas["second"],
        "second_deviation": abs(meas["second"] - pred_second),
    }


def cmd_phase_scan(args) -> int:
    alphas, gammas = parse_grid(args.grid_alpha), parse_grid(args.grid_gamma)
    for a in alphas:
        if not 0.0 <= a < 1.0:
            raise ConfigError(f"grid alpha {a} outside [0, 1)")
    for g in gammas:
        if not g > 0.0:
            raise ConfigError(f"grid gamma {g} must be positive")
    rows = [phase_row(a, g, args.beta, args.n) for a in alphas for g in gammas]
    _write_csv(_out_dir(args) / "phase_scan.csv", rows)
    return EXIT_OK


def cmd_oracle_check(args) -> int:
    rep = oracle_discrepancy(16)
    rep["tolerance"] = 1e-10
    rep["passed"] = max(rep["max_abs_mean"], rep["max_abs_second"]) < 1e-10
    _write_json(_out_dir(args) / "oracle.json", rep)
    print(json.dumps(rep))
    return EXIT_OK if rep["passed"] else EXIT_FAIL


def cmd_lil(args) -> int:
    p = _params(args)
    seeds = range(args.seed, args.seed + args.seeds)
    recs = ens.lil_diagnostic(p, args.n, seeds, n_start=args.n_start, workers=args.workers)
    rows = [r for rec in recs for r in rec.rows()]
    _write_csv(_out_dir(args) / "lil.csv", rows)
    return EXIT_OK


# ----------------------------------------------------------------------------
# parser
# ----------------------------------------------------------------------------


def _positive_int(s: str) -> int:
    """Positive integer; accepts ``1e6`` style input when it is integral."""
    try:
        v = float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {s!r}") from None
    if not v.is_integer() or v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {s!r}")
    return int(v)


def _seed(s: str) -> int:
    v = int(s)
    if not 0 <= v < 1 << 64:
        raise argparse.ArgumentTypeError("seed must lie in [0, 2^64)")
    return v


def _walk_flags(p: argparse.ArgumentParser):
    p.add_argument("--alpha", type=float, default=None, help="reinforcement strength in [0, 1]")
    p.add_argument("--beta", type=float, default=0.0)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--eps", type=float, default=None, help="constant bias")
    g.add_argument("--gamma", type=float, default=None, help="power-law bias n^-gamma")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="erw", description="Elephant random walks with reinforcement and bias.")
    ap.add_argument("--config", type=Path, default=None, help="JSON file with default flag values")
    sub = ap.add_subparsers(dest="command", required=True)

    def command(name, func, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", type=Path, default=None, help="JSON file with default flag values")
        sp.add_argument("--out", default=f"erw_output/{name}")
        sp.set_defaults(func=func)
        return sp

    sp = command("moments", cmd_moments, "exact moment table with asymptotic ratios")
    _walk_flags(sp)
    sp.add_argument("--n", type=_positive_int, default=10**6)
    sp.add_argument("--every", action="store_true", help="one row per time step")

    sp = command("simulate", cmd_simulate, "one trajectory")
    _walk_flags(sp)
    sp.add_argument("--n", type=_positive_int, default=1000)
    sp.add_argument("--seed", type=_seed, default=0)
    sp.add_argument("--index", type=int, default=0)
    sp.add_argument("--every", action="store_true", help="record every step (default: geometric grid)")

    sp = command("ensemble", cmd_ensemble, "checkpoint statistics over m trajectories")
    _walk_flags(sp)
    sp.add_argument("--n", type=_positive_int, default=10_000)
    sp.add_argument("--m", type=_positive_int, default=10_000)
    sp.add_argument("--seed", type=_seed, default=0)
    sp.add_argument("--workers", type=int, default=None)

    sp = command("fluctuation", cmd_fluctuation, "fluctuation around the random drift (1/2 < alpha < 1)")
    _walk_flags(sp)
    sp.add_argument("--n", type=_positive_int, default=10_000)
    sp.add_argument("--N", type=_positive_int, default=None)
    sp.add_argument("--m", type=_positive_int, default=20_000)
    sp.add_argument("--seed", type=_seed, default=0)
    sp.add_argument("--workers", type=int, default=None)
    sp.add_argument("--samples-format", choices=("csv", "bin"), default="csv")

    sp = command("verify", cmd_verify, "run a verification suite")
    sp.add_argument("--suite", choices=(*SUITES, "all"), required=True)
    _walk_flags(sp)
    sp.add_argument("--n", type=_positive_int, default=None)
    sp.add_argument("--N", type=_positive_int, default=None)
    sp.add_argument("--m", type=_positive_int, default=None)
    sp.add_argument("--seed", type=_seed, default=None)
    sp.add_argument("--workers", type=int, default=None)
    sp.add_argument("--tolerance-scale", type=float, default=1.0)

    sp = command("phase-scan", cmd_phase_scan, "deterministic scan of the decaying-bias phase table")
    sp.add_argument("--grid-alpha", default="0.1:0.9:0.1")
    sp.add_argument("--grid-gamma", default="0.1,0.3,0.5,0.8")
    sp.add_argument("--beta", type=float, default=0.0)
    sp.add_argument("--n", type=_positive_int, default=10**6)

    sp = command("oracle-check", cmd_oracle_check, "recursions against exact enumeration")

    sp = command("lil", cmd_lil, "iterated-logarithm running maxima")
    _walk_flags(sp)
    sp.add_argument("--n", type=_positive_int, default=10**7)
    sp.add_argument("--seeds", type=_positive_int, default=8)
    sp.add_argument("--seed", type=_seed, default=1, help="first seed")
    sp.add_argument("--n-start", type=_positive_int, default=100)
    sp.add_argument("--workers", type=int, default=None)
    return ap


def _load_config(path: Path) -> dict:
    try:
        cfg = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return {k.replace("-", "_"): v for k, v in cfg.items()}


def parse_args(argv=None) -> argparse.Namespace:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.config is None:
        return args
    cfg = _load_config(args.config)
    cfg.pop("command", None)
    sub = ap._subparsers._group_actions[0].choices[args.command]
    known = {a.dest for a in sub._actions}
    unknown = set(cfg) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    sub.set_defaults(**cfg)
    return ap.parse_args(argv)


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except SystemExit as exc:  # argparse usage errors
        return EXIT_USAGE if exc.code else EXIT_OK
    except ConfigError as exc:
        print(f"erw: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        out = _out_dir(args)
        _write_json(out / "config.json", _resolved(args))
        return args.func(args)
    except (ParameterError, ConfigError) as exc:
        print(f"erw: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
