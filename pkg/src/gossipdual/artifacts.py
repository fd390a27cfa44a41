"""CSV/JSON artifacts written by a run.

Floats are written with ``repr`` so they parse back to the identical value.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from gossipdual.env import Action
from gossipdual.executor import RunResult, drift_report, feasibility_report

TRAJECTORY = "trajectory.csv"
MULTIPLIERS = "multipliers.csv"
DIAGNOSTICS = "diagnostics.json"
RUNNING_AVERAGES = "running_averages.csv"
LAMBDA_SERIES = "lambda_series.csv"
MISMATCH = "mismatch.csv"
MESSAGES = "messages.log"
CONFIG_ECHO = "config.toml"

_ACTION_NAMES = [a.name.lower() for a in Action]


def _f(x: float) -> str:
    return "" if math.isnan(x) else repr(float(x))


def trajectory_header(n_zones: int) -> list[str]:
    return ["t", "agent_id", "x", "y", "action"] + [f"r_{m + 1}" for m in range(n_zones)]


def write_trajectory(result: RunResult, path: Path) -> None:
    horizon, n = result.actions.shape
    m = result.rewards.shape[1]
    with open(path, "w", newline="") as fh:
        fh.write(",".join(trajectory_header(m)) + "\n")
        pos = result.positions.tolist()
        acts = result.actions.tolist()
        rew = result.rewards.tolist()
        lines = []
        for t in range(horizon):
            r = ",".join(map(str, rew[t]))
            for i in range(n):
                x, y = pos[t][i]
                lines.append(f"{t},{i},{x},{y},{_ACTION_NAMES[acts[t][i]]},{r}\n")
            if len(lines) > 50_000:
                fh.writelines(lines)
                lines.clear()
        fh.writelines(lines)


MULTIPLIER_HEADER = ["k", "agent_id", "m", "lambda_prev", "lambda_curr", "g_prev", "g_curr"]


def write_multipliers(result: RunResult, path: Path) -> None:
    k_total, n, m = result.lambda_curr.shape
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MULTIPLIER_HEADER)
        for k in range(k_total):
            for i in range(n):
                for z in range(m):
                    w.writerow([k, i, z + 1, _f(result.lambda_prev[k, i, z]), _f(result.lambda_curr[k, i, z]),
                                _f(result.g_prev[k, i, z]), _f(result.g_curr[k, i, z])])


def write_plot_data(result: RunResult, out: Path) -> None:
    diag = result.diagnostics
    k_total, n, m = result.lambda_curr.shape
    t0 = result.config.t_zero
    with open(out / RUNNING_AVERAGES, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"avg_{z + 1}" for z in range(m)])
        for k in range(k_total):
            w.writerow([(k + 1) * t0] + [_f(v) for v in diag.running_averages[k]])
    with open(out / LAMBDA_SERIES, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "source"] + [f"lambda_{z + 1}" for z in range(m)])
        for k in range(k_total + 1):
            w.writerow([k, "central"] + [_f(v) for v in result.central_lambda[k]])
            if k >= 1:
                for i in range(n):
                    w.writerow([k, f"agent_{i}"] + [_f(v) for v in result.lambda_curr[k - 1, i]])
    with open(out / MISMATCH, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "m", "mismatch", "abs_mismatch", "bound"])
        for k in range(k_total):
            for z in range(m):
                w.writerow([k + 1, z + 1, _f(diag.mismatch[k, z]), _f(diag.abs_mismatch[k, z]),
                            _f(diag.mismatch_bound)])


def write_messages(result: RunResult, path: Path) -> None:
    with open(path, "w") as fh:
        for msg in result.messages:
            fh.write(f"{msg.time} {msg.sender} {msg.to_bytes().hex()}\n")


def summary(result: RunResult, tolerance: float = 0.02) -> dict:
    diag = result.diagnostics
    zones = result.config.zones
    feas = feasibility_report(diag, zones, tolerance)
    return {
        "steps": diag.steps,
        "rollouts": result.config.rollouts,
        "thresholds": diag.thresholds.tolist(),
        "terminal_averages": diag.terminal_averages.tolist(),
        "trailing_window": diag.trailing_window,
        "trailing_min": diag.trailing_min.tolist(),
        "feasibility": [vars(f) | {"passed": bool(f.passed)} for f in feas],
        "feasible": all(f.passed for f in feas),
        "lambda_sq": diag.lambda_sq.tolist(),
        "mismatch_max": float(diag.mismatch.max()),
        "mismatch_min": float(diag.mismatch.min()),
        "abs_mismatch_max": float(diag.abs_mismatch.max()),
        "mismatch_bound": diag.mismatch_bound,
        "drift": drift_report(diag).as_dict(),
        "conditions": diag.conditions.as_dict(),
        "deadline_violations": diag.deadline_violations,
        "consensus_failures": diag.consensus_failures,
        "grad_norm_sq_max": diag.grad_norm_sq_max,
    }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return None if math.isnan(obj) else float(obj)
    return obj


def write_all(result: RunResult, out: Path, tolerance: float = 0.02) -> dict:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    write_trajectory(result, out / TRAJECTORY)
    write_multipliers(result, out / MULTIPLIERS)
    write_plot_data(result, out)
    doc = _jsonable(summary(result, tolerance))
    (out / DIAGNOSTICS).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    if result.messages:
        write_messages(result, out / MESSAGES)
    return doc
