"""Run an experiment config over its seeds and persist traces and results."""
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from ..engine import run_gec
from ..errors import GecError
from ..oracles import exact_gaussian_posterior, generic_map_solve
from ..problems import build_glm_penalties, build_slr_penalties, synthesize_data
from ..spectral import SpectralModel, replica_fixed_point
from .report import EXTENSIONS, RECORD_FIELDS, report


def _base_record(cfg, seed):
    rec = dict.fromkeys(RECORD_FIELDS)
    gec = cfg.gec
    rec.update(seed=seed, status="ok", problem=cfg.problem.problem, n=cfg.problem.n, m=cfg.problem.m,
               mode=gec.get("mode", "mmse"), schedule=gec.get("schedule", "joint"),
               diagonalizer=gec.get("diagonalizer", "vector"))
    return rec


def _f(x):
    return None if x is None else float(x)


def run_seed(cfg, seed):
    """Run one seed; returns ``(record, trace_lines)``. Failures are recorded, not raised."""
    rec = _base_record(cfg, seed)
    t0 = time.perf_counter()
    lines = []
    try:
        inst = synthesize_data(cfg.problem, seed)
        n = cfg.problem.n
        if cfg.problem.problem == "slr":
            penalties = build_slr_penalties(inst)
            gcfg = cfg.gec_config(n)
        else:
            f1, f2, _ = build_glm_penalties(inst)
            penalties = (f1, f2)
            gcfg = cfg.gec_config(n + cfg.problem.m)
        state, trace = run_gec(gcfg, penalties)
        xhat = state.xhat[:n]
        eta = state.eta[:n]
        x = inst.x_true
        rec.update(
            iterations=len(trace) if len(trace) else state.iteration,
            converged=bool(trace.converged),
            termination=trace.termination,
            nmse=_f(np.sum((xhat - x) ** 2) / max(np.sum(x ** 2), 1e-300)),
            predicted_mse=_f(np.mean(1.0 / eta)),
            clipped=int(state.clipped),
        )
        if trace.records:
            last = trace.records[-1]
            rec.update(xhat_residual=last.xhat_residual, eta_residual=last.eta_residual,
                       grad_residual=_f(last.grad_residual))
        if cfg.oracles.get("replica") and cfg.problem.problem == "slr" and gcfg.mode == "mmse":
            rep = replica_fixed_point(inst.prior, SpectralModel.from_regression(inst.A, inst.gamma_w))
            rec["replica_mse"] = rep.mse
            rec["replica_rel_dev"] = abs(rec["predicted_mse"] - rep.mse) / rep.mse
        if cfg.oracles.get("exact_gaussian") and cfg.problem.problem == "slr" and inst.prior.name == "gaussian":
            mean, _ = exact_gaussian_posterior(inst.A, inst.gamma_w, inst.prior.mean, 1.0 / inst.prior.var, inst.y)
            rec["exact_mean_dev"] = float(np.max(np.abs(state.xhat - mean)))
        if cfg.oracles.get("map_solver") and gcfg.mode == "map" and (penalties[0].smooth or penalties[1].smooth):
            ref = generic_map_solve(penalties)
            rec["map_dev"] = float(np.max(np.abs(state.xhat - ref.x)))
        lines = [r.as_dict() for r in trace.records]
        lines.append({"termination": trace.termination, "converged": trace.converged})
    except (GecError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        rec["status"] = "failed"
        rec["error"] = f"{type(exc).__name__}: {exc}"
    rec["time_s"] = time.perf_counter() - t0
    return rec, lines


def _run_one(args):
    return run_seed(*args)


def run_experiment(cfg, write=True):
    """Run every seed (in parallel up to ``cfg.workers``); records are sorted by seed."""
    tasks = [(cfg, s) for s in cfg.seeds]
    if cfg.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(cfg.workers, len(tasks))) as pool:
            results = list(pool.map(_run_one, tasks))
    else:
        results = [_run_one(t) for t in tasks]
    results.sort(key=lambda rt: rt[0]["seed"])
    records = [r for r, _ in results]
    if write:
        os.makedirs(cfg.output_dir, exist_ok=True)
        if cfg.traces:
            for rec, lines in results:
                with open(os.path.join(cfg.output_dir, f"trace-{rec['seed']}.jsonl"), "w") as fh:
                    for line in lines:
                        fh.write(json.dumps(line) + "\n")
        for fmt in cfg.formats:
            report(records, fmt, os.path.join(cfg.output_dir, EXTENSIONS[fmt]))
    return records
