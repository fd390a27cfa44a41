"""Command-line front end: ``gossipdual check|run|sweep``.

Exit status: 0 success, 2 configuration error, 3 runtime contract violation.
Set ``GOSSIPDUAL_LOG`` (e.g. ``DEBUG``, ``WARNING``) to change log verbosity.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from gossipdual import artifacts
from gossipdual.config import (build_config, dump_document, effective_document, load_config,
                               load_document, override)
from gossipdual.errors import ConfigError, ContractViolation
from gossipdual.executor import check_conditions, run

EXIT_OK, EXIT_CONFIG, EXIT_CONTRACT = 0, 2, 3
SWEEPABLE = ("eta", "t_zero", "p_up")

log = logging.getLogger("gossipdual")


def child_seed(base_seed: int, value: float) -> int:
    """Stable per-value seed.

    First 8 bytes (big-endian) of ``sha256(f"{base_seed}:{float(value)!r}")``,
    masked to 63 bits.
    """
    digest = hashlib.sha256(f"{base_seed}:{float(value)!r}".encode()).digest()
    return int.from_bytes(digest[:8], "big") & (2**63 - 1)


def cmd_check(args) -> int:
    config, _ = load_config(args.config)
    cond = check_conditions(config)
    print(f"config:          {args.config}")
    print(f"agents x zones:  {config.n_agents} x {config.n_zones}")
    print(f"graph diameter:  {cond.diameter} (retention d = {config.d})")
    print(f"delta_c:         {cond.delta_c:.6g}")
    print(f"condition lhs:   {cond.lhs:.6g}  ({'<' if cond.satisfied else '>='} delta_c)")
    print(f"condition met:   {'yes' if cond.satisfied else 'no'}")
    print(f"c_max, sum(c):   {cond.c_max:.6g}, {cond.c_sum:.6g} (N-1 = {config.n_agents - 1})")
    print(f"thresholds ok:   {'yes' if cond.spec_ok else 'no'}")
    return EXIT_OK


def _execute(doc: dict, out: Path, trace: bool) -> dict:
    config = build_config(doc)
    result = run(config, trace_messages=trace)
    try:
        out.mkdir(parents=True, exist_ok=True)
        summary = artifacts.write_all(result, out)
        (out / artifacts.CONFIG_ECHO).write_text(dump_document(effective_document(doc, config)))
    except OSError as exc:
        raise ConfigError(f"cannot write artifacts to {out}: {exc.strerror}") from exc
    return summary


def _print_summary(summary: dict) -> None:
    cond = summary["conditions"]
    print(f"steps: {summary['steps']}  rollouts: {summary['rollouts']}")
    print(f"condition: lhs={cond['lhs']:.4g} delta_c={cond['delta_c']:.4g} "
          f"met={'yes' if cond['satisfied'] else 'no'}")
    for z in summary["feasibility"]:
        print(f"zone {z['zone_id']}: avg={z['average']:.4f} c={z['threshold']:.4f} "
              f"trailing_min={z['trailing_min']:.4f} {'PASS' if z['passed'] else 'FAIL'}")
    print(f"mismatch |max|={summary['abs_mismatch_max']:.3g} bound={summary['mismatch_bound']:.3g}  "
          f"deadline violations={summary['deadline_violations']}  "
          f"consensus failures={summary['consensus_failures']}")
    drift = summary["drift"]
    if drift["status"] == "insufficient":
        print(f"drift: insufficient samples ({drift['n_samples']})")
    else:
        print(f"drift: mean={drift['mean']:.4g} 95% CI [{drift['ci_low']:.4g}, {drift['ci_high']:.4g}] "
              f"n={drift['n_samples']}")
    print(f"feasible: {'yes' if summary['feasible'] else 'no'}")


def cmd_run(args) -> int:
    doc = load_document(args.config)
    out = Path(args.out or doc.get("run", {}).get("output_dir") or "out")
    summary = _execute(doc, out, args.trace_messages)
    _print_summary(summary)
    print(f"artifacts: {out}")
    return EXIT_OK


def _sweep_one(job):
    doc, out, key, value = job
    summary = _execute(doc, out, False)
    gaps = [z["gap"] for z in summary["feasibility"]]
    return {
        "param": key,
        "value": value,
        "seed": doc["run"]["seed"],
        **{f"gap_{i + 1}": g for i, g in enumerate(gaps)},
        "max_gap": max(gaps),
        "mismatch_max": summary["mismatch_max"],
        "abs_mismatch_max": summary["abs_mismatch_max"],
        "mismatch_bound": summary["mismatch_bound"],
        "deadline_violations": summary["deadline_violations"],
        "feasible": summary["feasible"],
    }


def cmd_sweep(args) -> int:
    if args.param not in SWEEPABLE:
        raise ConfigError(f"cannot sweep {args.param!r}; sweepable keys are {', '.join(SWEEPABLE)}")
    raw = [v.strip() for v in args.values.split(",") if v.strip()]
    try:
        values = [float(v) for v in raw]
    except ValueError as exc:
        raise ConfigError(f"--values must be numbers: {args.values!r}") from exc
    doc = load_document(args.config)
    build_config(doc)
    base_seed = doc.get("run", {}).get("seed", 0)
    out = Path(args.out or doc.get("run", {}).get("output_dir") or "out")
    jobs = []
    for text, value in zip(raw, values):
        child = override(doc, args.param, value)
        child.setdefault("run", {})["seed"] = child_seed(base_seed, value)
        build_config(child)
        jobs.append((child, out / f"{args.param}={text}", args.param, text))
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            rows = list(pool.map(_sweep_one, jobs))
    else:
        rows = [_sweep_one(j) for j in jobs]
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    for r in rows:
        print(f"{r['param']}={r['value']}: max_gap={r['max_gap']:.4f} "
              f"|mismatch|={r['abs_mismatch_max']:.3g} bound={r['mismatch_bound']:.3g} "
              f"deadline_violations={r['deadline_violations']}")
    print(f"sweep table: {out / 'sweep.csv'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gossipdual", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="validate a config and print the feasibility-condition check")
    p.add_argument("config")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("run", help="run one experiment and write artifacts")
    p.add_argument("config")
    p.add_argument("--out", help="output directory (default: [run].output_dir or ./out)")
    p.add_argument("--trace-messages", action="store_true", help="log every gossip message as hex")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run one experiment per value of a numeric parameter")
    p.add_argument("config")
    p.add_argument("--param", required=True, help=f"one of {', '.join(SWEEPABLE)}")
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--out")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("GOSSIPDUAL_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ContractViolation as exc:
        log.error("contract violation: %s", exc)
        return EXIT_CONTRACT


if __name__ == "__main__":
    sys.exit(main())
