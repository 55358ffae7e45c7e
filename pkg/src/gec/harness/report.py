"""Result persistence: CSV, JSON lines and a text summary."""
import csv
import json
import math

import numpy as np

RECORD_FIELDS = (
    "seed", "status", "problem", "n", "m", "mode", "schedule", "diagonalizer",
    "iterations", "converged", "termination", "nmse", "predicted_mse", "replica_mse",
    "replica_rel_dev", "xhat_residual", "eta_residual", "grad_residual", "clipped",
    "exact_mean_dev", "map_dev", "error", "time_s",
)
TIMING_FIELDS = ("time_s",)


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(records, path, include_timing=True):
    cols = [c for c in RECORD_FIELDS if include_timing or c not in TIMING_FIELDS]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for rec in records:
            w.writerow([_cell(rec.get(c)) for c in cols])


def write_jsonl(records, path):
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps({c: rec.get(c) for c in RECORD_FIELDS}, allow_nan=True) + "\n")


def _parse_cell(s):
    if s == "":
        return None
    if s in ("true", "false"):
        return s == "true"
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def load_records(path):
    """Read records written by :func:`write_jsonl` or :func:`write_csv`."""
    path = str(path)
    if path.endswith(".csv"):
        with open(path, newline="") as fh:
            return [{k: _parse_cell(v) for k, v in row.items()} for row in csv.DictReader(fh)]
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def _median(values):
    vals = [v for v in values if v is not None and not (isinstance(v, float) and math.isnan(v))]
    return float(np.median(vals)) if vals else None


def summary_text(records, checks=None):
    lines = []
    ok = [r for r in records if r.get("status") == "ok"]
    lines.append(f"records: {len(records)}  ok: {len(ok)}  failed: {len(records) - len(ok)}")
    conv = sum(1 for r in ok if r.get("converged"))
    lines.append(f"converged: {conv}/{len(ok)}")
    for key in ("nmse", "predicted_mse", "replica_mse", "replica_rel_dev", "xhat_residual",
                "eta_residual", "iterations"):
        med = _median([r.get(key) for r in ok])
        if med is not None:
            lines.append(f"median {key}: {med:.6g}")
    for r in records:
        if r.get("status") != "ok":
            lines.append(f"seed {r.get('seed')} failed: {r.get('error')}")
    if checks:
        lines.append("")
        lines.append(f"{'suite':<14} {'invariant':<44} {'cases':>6} {'fail':>5}  verdict")
        for rep in checks:
            for inv, (n, nfail) in rep.table().items():
                lines.append(f"{rep.name:<14} {inv:<44} {n:>6} {nfail:>5}  {'PASS' if nfail == 0 else 'FAIL'}")
    return "\n".join(lines) + "\n"


def write_text(records, path, checks=None):
    with open(path, "w") as fh:
        fh.write(summary_text(records, checks))


WRITERS = {"csv": write_csv, "jsonl": write_jsonl, "text": write_text}
EXTENSIONS = {"csv": "results.csv", "jsonl": "results.jsonl", "text": "summary.txt"}


def report(records, fmt, path, checks=None):
    """Write ``records`` in format ``fmt`` (csv, jsonl or text) to ``path``."""
    if not records:
        raise ValueError("report needs at least one record")
    if fmt not in WRITERS:
        raise ValueError(f"unknown report format {fmt!r}")
    if fmt == "text":
        write_text(records, path, checks)
    else:
        WRITERS[fmt](records, path)
    return path
