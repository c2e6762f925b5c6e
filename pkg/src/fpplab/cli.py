"""Command-line interface.

Subcommands:
  experiment     main anti-concentration study (CSV + JSON outputs)
  mw-check       verification battery: coupling checks, inequality checks,
                 path-gain events, and the window-probability chain
  coupling-check coupling diagnostics for one law (JSON report)
  passage-time   passage times over an r-grid for one environment (JSON)
  lattice-dump   annulus edge set Lambda_k as CSV
  omega-diag     r-grid increment diagnostic (JSON)

Exit codes: 0 success, 2 validation/config failure, 3 acceptance-check
failure (a battery reported a violation).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

import numpy as np

from .coupling import QuantileCoupling
from .distributions import LawConfigError, law_from_config
from .estimators import omega_diagnostic
from .experiments import (
    ConfigError,
    ExperimentConfig,
    coupling_check_battery,
    emit_outputs,
    run_experiment,
    run_mw_battery,
)
from .fpp_core import passage_time_profile, sample_environment
from .lattice import GridBox, annulus_edges
from .rng import RngStream

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CHECK_FAILED = 3


def _emit(payload, out: str | None) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True, default=_jsonable) + "\n"
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _jsonable(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return dataclasses.asdict(obj)
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON-serializable: {type(obj).__name__}")


def _load_config(args) -> ExperimentConfig:
    overrides = {
        "master_seed": getattr(args, "seed", None),
        "workers": getattr(args, "threads", None),
        "out_dir": getattr(args, "out", None),
    }
    if args.config:
        return ExperimentConfig.from_file(args.config, **overrides)
    if getattr(args, "law", None):
        law = json.loads(args.law)
        return ExperimentConfig.from_dict({"law": law}, **overrides)
    raise ConfigError("either --config or --law is required")


def _law_record(args) -> dict:
    if getattr(args, "law", None):
        return json.loads(args.law)
    if args.config:
        return ExperimentConfig.from_file(args.config).law
    raise ConfigError("either --config or --law is required")


def _cmd_experiment(args) -> int:
    config = _load_config(args)
    record = run_experiment(config)
    out_dir = config.out_dir or "."
    paths = emit_outputs(record, config, out_dir)
    sys.stdout.write(json.dumps({"written": paths,
                                 "config_hash": record.config_hash}) + "\n")
    return EXIT_OK


def _cmd_mw_check(args) -> int:
    config = _load_config(args)
    record = run_mw_battery(config)
    payload = {
        "law": record.law,
        "config_hash": record.config_hash,
        "delta0": record.delta0,
        "gaussian_closed_form": record.gaussian_closed_form,
        "checks": record.coupling_checks,
        "mw_checks": record.mw_checks,
        "increment_reports": record.increment_reports,
        "chain_rows": record.chain_rows,
        "runtime_s": record.runtime_s,
        "all_passed": record.all_passed,
    }
    _emit(payload, getattr(args, "out", None))
    return EXIT_OK if record.all_passed else EXIT_CHECK_FAILED


def _concrete_seed(args) -> int:
    return args.seed if args.seed is not None else 1


def _cmd_coupling_check(args) -> int:
    law_rec = _law_record(args)
    law = law_from_config(law_rec)
    checks = coupling_check_battery(law, _concrete_seed(args))
    payload = {"law": law_rec, "checks": checks}
    _emit(payload, getattr(args, "out", None))
    return EXIT_OK if all(c["pass"] for c in checks) else EXIT_CHECK_FAILED


def _parse_r_grid_flag(text: str) -> np.ndarray:
    try:
        lo, hi, count = text.split(":")
        grid = np.linspace(float(lo), float(hi), int(count))
    except ValueError as exc:
        raise ConfigError(f"bad --r-grid {text!r}; expected lo:hi:count") from exc
    return grid


def _cmd_passage_time(args) -> int:
    law = law_from_config(_law_record(args))
    n = args.n
    R = args.R if args.R is not None else 4 * n
    grid = np.sort(_parse_r_grid_flag(args.r_grid))
    seed = _concrete_seed(args)
    box = GridBox(R)
    env = sample_environment(law, box, RngStream(seed, 9, n, 0))
    results = passage_time_profile(env, QuantileCoupling(law), n, grid,
                                   (0, 0), (n, 0), R)
    rows = [{"r": float(r), "time": res.time,
             "touched_boundary": res.touched_boundary}
            for r, res in zip(grid, results)]
    _emit({"law": law.descriptor(), "n": n, "R": R, "seed": seed,
           "profile": rows}, getattr(args, "out", None))
    return EXIT_OK


def _cmd_lattice_dump(args) -> int:
    box = GridBox(2 ** (args.k + 1))
    lines = ["edge_slot,ux,uy,vx,vy"]
    for u, v in annulus_edges(args.k):
        lines.append(f"{box.edge_slot(u, v)},{u[0]},{u[1]},{v[0]},{v[1]}")
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_omega_diag(args) -> int:
    law = law_from_config(_law_record(args))
    diag = omega_diagnostic(law, args.n, args.trials, _concrete_seed(args))
    payload = dataclasses.asdict(diag)
    payload["failure_freq"] = diag.failure_freq
    payload["window_hits"] = {str(k): v for k, v in diag.window_hits.items()}
    _emit(payload, getattr(args, "out", None))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fpplab", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True, law=False):
        if config:
            p.add_argument("--config", help="path to a JSON config file")
        if law:
            p.add_argument("--law", help='inline law record, e.g. \'{"family":"exponential","rate":1.0}\'')
        p.add_argument("--seed", type=int, default=None, help="master seed override")
        p.add_argument("--threads", type=int, default=None, help="worker count")
        p.add_argument("--out", help="output directory or file")

    p = sub.add_parser("experiment", help="run the main study")
    common(p, law=True)
    p.set_defaults(fn=_cmd_experiment)

    p = sub.add_parser("mw-check", help="run the verification battery")
    common(p, law=True)
    p.set_defaults(fn=_cmd_mw_check)

    p = sub.add_parser("coupling-check", help="coupling diagnostics for one law")
    common(p, law=True)
    p.set_defaults(fn=_cmd_coupling_check)

    p = sub.add_parser("passage-time", help="profile T_r over an r-grid")
    common(p, law=True)
    p.add_argument("--n", type=int, required=True, help="distance scale (>= 16)")
    p.add_argument("--R", type=int, default=None, help="restriction radius (default 4n)")
    p.add_argument("--r-grid", default="-1:1:9",
                   help="lo:hi:count; use --r-grid=-1:1:9 for negative lo")
    p.set_defaults(fn=_cmd_passage_time)

    p = sub.add_parser("lattice-dump", help="dump Lambda_k edges as CSV")
    p.add_argument("--k", type=int, required=True, help="annulus scale")
    p.add_argument("--out", help="output file (default stdout)")
    p.set_defaults(fn=_cmd_lattice_dump)

    p = sub.add_parser("omega-diag", help="grid-step increment diagnostic")
    common(p, law=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--trials", type=int, default=100)
    p.set_defaults(fn=_cmd_omega_diag)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, LawConfigError, json.JSONDecodeError) as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return EXIT_CONFIG
    except ValueError as exc:
        sys.stderr.write(f"invalid arguments: {exc}\n")
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
