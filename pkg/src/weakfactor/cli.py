"""Command-line front end for the prebuilt experiments.

Subcommands map one-to-one onto the experiment builders in
:mod:`weakfactor.experiments`.  Option values resolve in three layers:
built-in defaults, then a config file (INI style, a ``[common]`` section
plus one section per subcommand), then command-line flags.

Exit codes: 0 on success, 1 on experiment failure, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import configparser
import json
import math
import os
import sys

from . import __version__, experiments
from .entrywise import DEFAULT_C0, calibrate_c0
from .montecarlo import (
    ExperimentError,
    ResultTable,
    rate_slope,
    run_experiment,
    write_csv,
    write_json_summary,
)

__all__ = ["main", "build_parser", "resolve_config"]


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", metavar="FILE", help="INI config file")
    sub.add_argument("--out", metavar="PATH", help="output file path")
    sub.add_argument("--format", choices=("csv", "json"), dest="format")
    sub.add_argument("--threads", type=int, help="worker cap (default: WEAKFACTOR_THREADS or 1)")
    sub.add_argument("--reps", type=int, help="replications per grid point")
    sub.add_argument("--seed", type=int, help="master seed")
    sub.add_argument("--n", type=int)
    sub.add_argument("--T", type=int, dest="T")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="weakfactor",
        description="Factor-model inference experiments at arbitrary factor strength.",
    )
    parser.add_argument("--version", action="version", version=f"weakfactor {__version__}")
    subs = parser.add_subparsers(dest="subcommand", required=True)

    p = subs.add_parser(
        "entrywise-rate",
        help="plug-in estimator error rate in strength or in matrix size",
    )
    _add_common(p)
    p.add_argument("--mode", choices=("tau", "size"), help="grid direction (default tau)")
    p.add_argument("--kappa", type=float)
    p.add_argument("--spike-frac", type=float, dest="spike_frac")

    p = subs.add_parser(
        "entrywise-coverage", help="adaptive confidence interval coverage and length"
    )
    _add_common(p)
    p.add_argument("--kappa", type=float)
    p.add_argument("--C0", type=float, dest="c0")
    p.add_argument(
        "--calibrate", action="store_true", default=None,
        help="calibrate C0 on a reference grid before running",
    )

    p = subs.add_parser(
        "adaptivity-demo",
        help="pre-test interval coverage collapse on the hidden-entry pair",
    )
    _add_common(p)
    p.add_argument("--kappa", type=float)
    p.add_argument("--eta", type=float)
    p.add_argument("--tau2", type=float)
    p.add_argument("--alpha", type=float)

    p = subs.add_parser(
        "lower-bound-check",
        help="likelihood-ratio test power at the two-point testing pair",
    )
    _add_common(p)
    p.add_argument("--kappa", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--alpha", type=float)

    p = subs.add_parser(
        "panel-rate", help="panel trace estimator RMSE across sizes and strengths"
    )
    _add_common(p)
    p.add_argument(
        "--panel-config", dest="panel_config",
        choices=tuple(experiments.PANEL_CONFIGS) + ("all",),
    )
    p.add_argument("--beta", type=float)

    p = subs.add_parser(
        "panel-tradeoff",
        help="fixed-width strong-factor interval against the shifted alternative",
    )
    _add_common(p)
    p.add_argument("--kappa2", type=float)
    p.add_argument("--c", type=float)

    p = subs.add_parser(
        "oracle-check", help="information-theory oracles against Monte Carlo"
    )
    _add_common(p)

    return parser


DEFAULTS = {
    "entrywise-rate": {
        "n": 100, "T": 100, "reps": 500, "seed": 20260823, "kappa": 1.0,
        "spike_frac": 0.75, "mode": "tau", "format": "csv",
    },
    "entrywise-coverage": {
        "n": 100, "T": 100, "reps": 500, "seed": 20260823, "kappa": 1.0,
        "c0": DEFAULT_C0, "calibrate": False, "format": "csv",
    },
    "adaptivity-demo": {
        "n": 100, "T": 100, "reps": 500, "seed": 20260823, "kappa": 1.0,
        "eta": 0.5, "tau2": 1.0, "alpha": 0.05, "format": "csv",
    },
    "lower-bound-check": {
        "n": 100, "T": 100, "reps": 2000, "seed": 20260823, "kappa": 1.0,
        "tau": None, "alpha": 0.05, "format": "json",
    },
    "panel-rate": {
        "n": None, "T": None, "reps": 500, "seed": 20260823,
        "panel_config": "strong", "beta": 0.5, "format": "csv",
    },
    "panel-tradeoff": {
        "n": 100, "T": 100, "reps": 500, "seed": 20260823, "kappa2": 10.0,
        "c": 3.9, "format": "csv",
    },
    "oracle-check": {
        "n": 8, "T": 8, "reps": 100_000, "seed": 20260823, "format": "json",
    },
}


def _coerce(key: str, raw: str):
    if key in ("n", "T", "reps", "seed", "threads"):
        return int(raw)
    if key in ("calibrate",):
        return raw.strip().lower() in ("1", "true", "yes", "on")
    if key in ("mode", "format", "out", "panel_config"):
        return raw
    return float(raw)


def resolve_config(args: argparse.Namespace) -> dict:
    """Merge defaults, config-file values, and flags (highest priority last)."""
    sub = args.subcommand
    cfg = dict(DEFAULTS[sub])
    cfg.setdefault("threads", None)
    cfg.setdefault("out", None)

    if args.config:
        ini = configparser.ConfigParser()
        read = ini.read(args.config)
        if not read:
            raise FileNotFoundError(f"config file not found: {args.config}")
        for section in ("common", sub):
            if ini.has_section(section):
                for key, raw in ini.items(section):
                    key = key.replace("-", "_")
                    if key not in cfg:
                        raise ValueError(f"unknown config key {key!r} in [{section}]")
                    cfg[key] = _coerce(key, raw)

    for key, value in vars(args).items():
        if key in ("subcommand", "config") or value is None:
            continue
        cfg[key] = value

    if cfg.get("threads") is None:
        cfg["threads"] = int(os.environ.get("WEAKFACTOR_THREADS", "1"))
    cfg["subcommand"] = sub
    cfg["library_version"] = __version__
    return cfg


def _write_table(table: ResultTable, cfg: dict) -> None:
    out = cfg.get("out")
    if not out:
        return
    if cfg["format"] == "csv":
        write_csv(table, out)
        with open(out + ".meta.json", "w") as fh:
            json.dump(cfg, fh, indent=2, sort_keys=True)
            fh.write("\n")
    else:
        write_json_summary(table, out, config=cfg)


def _write_doc(doc: dict, cfg: dict) -> None:
    out = cfg.get("out")
    if not out:
        return
    doc = {"config": cfg, **doc}
    if cfg["format"] == "csv":
        import csv as _csv

        with open(out, "w", newline="") as fh:
            writer = _csv.writer(fh)
            writer.writerow(["key", "value"])
            for key, value in sorted(_flatten(doc).items()):
                writer.writerow([key, value])
    else:
        with open(out, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True, default=str)
            fh.write("\n")


def _flatten(doc: dict, prefix: str = "") -> dict:
    flat = {}
    for key, value in doc.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flatten(value, name + "."))
        else:
            flat[name] = value
    return flat


def _print_summaries(table: ResultTable) -> None:
    for s in table.summaries:
        parts = [f"  grid {s.grid_index} {s.grid_point}"]
        if s.coverage is not None:
            parts.append(f"coverage {s.coverage:.3f} (se {s.coverage_se:.3f})")
        if s.mean_width is not None:
            parts.append(f"width {s.mean_width:.4g}")
        if s.rmse is not None:
            parts.append(f"rmse {s.rmse:.4g}")
        if s.median_abs_error is not None:
            parts.append(f"med|err| {s.median_abs_error:.4g}")
        if s.n_error:
            parts.append(f"errors {s.n_error}")
        print("  ".join(parts))


def _cmd_entrywise_rate(cfg: dict) -> int:
    if cfg["mode"] == "size":
        spec = experiments.rate_in_size_spec(
            reps=cfg["reps"], seed=cfg["seed"], kappa=cfg["kappa"],
            spike_frac=cfg["spike_frac"],
        )
    else:
        spec = experiments.rate_in_tau_spec(
            n=cfg["n"], t=cfg["T"], reps=cfg["reps"], seed=cfg["seed"],
            kappa=cfg["kappa"], spike_frac=cfg["spike_frac"],
        )
    table = run_experiment(spec, workers=cfg["threads"])
    print(f"{spec.name}: R = {spec.replications}, seed = {spec.master_seed}")
    _print_summaries(table)
    if cfg["mode"] == "tau":
        slope = rate_slope(table, "tau", "median_abs_error")
        print(f"log-log slope of median error vs tau: {slope:.3f} (theory: -1)")
    else:
        for s in table.summaries:
            gp = s.grid_point
            norm = s.median_abs_error * gp["tau"] / math.sqrt(gp["n"] + gp["T"])
            print(f"  n=T={gp['n']}: med|err| * tau / sqrt(n+T) = {norm:.4f}")
    _write_table(table, cfg)
    return 0


def _cmd_entrywise_coverage(cfg: dict) -> int:
    c0 = cfg["c0"]
    if cfg["calibrate"]:
        taus = [f * math.sqrt(cfg["n"] * cfg["T"]) for f in (0.3, 0.5, 1.0)]
        c0 = calibrate_c0(
            cfg["n"], cfg["T"], cfg["kappa"], taus, seed=cfg["seed"],
        )
        cfg["c0"] = c0
        print(f"calibrated C0 = {c0:.3f}")
    spec = experiments.adaptive_coverage_spec(
        n=cfg["n"], t=cfg["T"], reps=cfg["reps"], seed=cfg["seed"],
        kappa=cfg["kappa"], c0=c0,
    )
    table = run_experiment(spec, workers=cfg["threads"])
    print(f"{spec.name}: R = {spec.replications}, C0 = {c0:g}")
    _print_summaries(table)
    _write_table(table, cfg)
    return 0


def _cmd_adaptivity_demo(cfg: dict) -> int:
    spec = experiments.pretest_control_spec(
        n=cfg["n"], t=cfg["T"], reps=cfg["reps"], seed=cfg["seed"],
        kappa=cfg["kappa"], eta=cfg["eta"], tau2=cfg["tau2"], alpha=cfg["alpha"],
    )
    table = run_experiment(spec, workers=cfg["threads"])
    print(f"{spec.name}: R = {spec.replications}")
    _print_summaries(table)
    alt = table.summaries[1]
    print(
        f"alternative-arm coverage {alt.coverage:.3f} "
        "(worst-case bound for shrinking-width intervals: 0.5)"
    )
    _write_table(table, cfg)
    return 0


def _cmd_lower_bound_check(cfg: dict) -> int:
    result = experiments.lr_power_check(
        n=cfg["n"], t=cfg["T"], tau=cfg["tau"], kappa=cfg["kappa"],
        alpha=cfg["alpha"], reps=cfg["reps"], seed=cfg["seed"],
    )
    print(f"two-point testing pair at n={result['n']}, T={result['T']}, tau={result['tau']:g}")
    print(f"  TV upper bound      {result['tv_upper']:.6f} (target <= alpha = {result['alpha']})")
    print(f"  chi2 cross moment   {result['chi2_cross']:.6f}")
    print(f"  calibrated size     {result['size']:.4f}")
    print(f"  power               {result['power']:.4f} (bound 2*alpha = {result['power_bound']})")
    _write_doc(result, cfg)
    return 0


def _cmd_panel_rate(cfg: dict) -> int:
    names = (
        tuple(experiments.PANEL_CONFIGS)
        if cfg["panel_config"] == "all"
        else (cfg["panel_config"],)
    )
    tables = []
    for name in names:
        spec = experiments.panel_rate_spec(
            config=name, reps=cfg["reps"], seed=cfg["seed"], beta=cfg["beta"],
        )
        table = run_experiment(spec, workers=cfg["threads"])
        tables.append(table)
        print(f"{spec.name}: R = {spec.replications}")
        for s in table.summaries:
            scaled = s.rmse * math.sqrt(s.grid_point["n"] * s.grid_point["T"])
            print(f"  n=T={s.grid_point['n']}: sqrt(nT) * RMSE = {scaled:.3f}")
    if cfg.get("out"):
        root, ext = os.path.splitext(cfg["out"])
        for table in tables:
            sub_cfg = dict(cfg, out=f"{root}-{table.spec.name}{ext}")
            _write_table(table, sub_cfg)
    return 0


def _cmd_panel_tradeoff(cfg: dict) -> int:
    spec = experiments.panel_tradeoff_spec(
        n=cfg["n"], t=cfg["T"], reps=cfg["reps"], seed=cfg["seed"],
        kappa2=cfg["kappa2"], c=cfg["c"],
    )
    table = run_experiment(spec, workers=cfg["threads"])
    width = 3.92 / math.sqrt(cfg["n"] * cfg["T"]) / math.sqrt(1 + cfg["kappa2"] ** 2)
    bound = 0.5 + 1.96 / math.sqrt(1 + cfg["kappa2"] ** 2)
    print(f"{spec.name}: R = {spec.replications}, exact width = {width:.6g}")
    _print_summaries(table)
    print(f"alternative coverage bound 1/2 + 1.96 (1+kappa2^2)^(-1/2) = {bound:.4f}")
    _write_table(table, cfg)
    return 0


def _cmd_oracle_check(cfg: dict) -> int:
    result = experiments.oracle_checks(
        reps=cfg["reps"], seed=cfg["seed"], n=cfg["n"], t=cfg["T"],
    )
    kl, chi2, tv = result["kl"], result["chi2"], result["tv"]
    print(f"oracle checks at n={result['n']}, T={result['T']}, R={result['reps']}")
    print(f"  KL   exact {kl['exact']:.6f}  MC {kl['mc']:.6f}  rel err {kl['rel_err']:.4f}")
    print(f"  chi2 exact {chi2['exact']:.6f}  MC(trimmed) {chi2['mc_trimmed']:.6f}")
    print(f"  TV   upper {tv['upper']:.6f}  MC mean|LR-1| {tv['mc']:.6f}")
    _write_doc(result, cfg)
    return 0


_COMMANDS = {
    "entrywise-rate": _cmd_entrywise_rate,
    "entrywise-coverage": _cmd_entrywise_coverage,
    "adaptivity-demo": _cmd_adaptivity_demo,
    "lower-bound-check": _cmd_lower_bound_check,
    "panel-rate": _cmd_panel_rate,
    "panel-tradeoff": _cmd_panel_tradeoff,
    "oracle-check": _cmd_oracle_check,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        return _COMMANDS[args.subcommand](cfg)
    except (ExperimentError, ValueError, OSError) as exc:
        print(f"experiment failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
