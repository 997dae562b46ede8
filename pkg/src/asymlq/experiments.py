"""Experiment harness: the two-state benchmark and the random-instance suite.

Outputs are plain data (CSV with 17 significant digits plus a JSON
manifest) so that figures can be drawn by any external tool.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .belief_analysis import analyze_stage, gramian_pair
from .best_response import run_best_response
from .config import default_tolerances
from .errors import AsymlqError
from .game_model import paper_example, random_instance

log = logging.getLogger(__name__)

QUANTITIES = ("Wc1", "Wo1", "Wc2", "Wo2", "HSV1", "HSV2")
DEFAULT_THRESHOLDS = (1e-5, 1e-10)


def fmt(x):
    return f"{x:.17g}"


def write_csv(path, header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    Path(path).write_text(buf.getvalue())


def write_json(path, data):
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def environment():
    return {"asymlq": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def run_paper_example(output_dir, max_k=10, tol=1e-6, analysis_k=5):
    """Write costs.csv, gramian_decay.csv, cholesky_compare.csv and manifest.json.

    ``gramian_decay.csv`` holds the minimizer's normalized controllability
    Gramian eigenvalues for every iteration; ``cholesky_compare.csv`` compares
    them with the decay estimates at iteration ``analysis_k``.
    """
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    spec = paper_example()
    trace = run_best_response(spec, max_k=max(max_k, analysis_k), tol=tol, stop_on_convergence=False)

    cost_rows = [(s.k, s.player, s.cost) for s in trace.stages if s.k <= max_k]
    write_csv(out / "costs.csv", ["iteration", "player", "cost"], cost_rows)

    decay_rows, compare_rows = [], []
    for stage in trace.stages:
        if stage.player != 1 or stage.k > max_k:
            continue
        analysis = analyze_stage(stage, l_grid=[])
        for i, ratio in enumerate(analysis.decay.gramian_ratios):
            decay_rows.append((stage.k, i + 1, float(ratio)))
        if stage.k == analysis_k:
            d = analysis.decay
            compare_rows = [(i + 1, float(d.delta_ratios[i]), float(d.gramian_ratios[i]))
                            for i in range(len(d.deltas))]
    write_csv(out / "gramian_decay.csv", ["k", "index", "eigenvalue_ratio"], decay_rows)
    write_csv(out / "cholesky_compare.csv", ["index", "delta_ratio", "gramian_ratio"], compare_rows)

    converged_at = None
    c1, c2 = trace.costs(1), trace.costs(2)
    for k in range(2, min(len(c1), len(c2)) + 1):
        change = max(abs(c[k - 1] - c[k - 2]) / max(1.0, abs(c[k - 1])) for c in (c1, c2))
        if change <= tol:
            converged_at = k
            break
    manifest = {
        "experiment": "paper_example",
        "max_k": max_k,
        "analysis_k": analysis_k,
        "convergence_tol": tol,
        "converged_at_k": converged_at,
        "tolerances": dataclasses.asdict(default_tolerances()),
        "versions": environment(),
        "files": ["costs.csv", "gramian_decay.csv", "cholesky_compare.csv"],
    }
    write_json(out / "manifest.json", manifest)
    return trace, manifest


# --- random suite -----------------------------------------------------------

@dataclass
class SuiteStats:
    instance_count: int
    iterations_per_instance: int
    thresholds: list
    proportions: dict
    failures: list = field(default_factory=list)
    value_counts: dict = field(default_factory=dict)

    def to_dict(self):
        return dataclasses.asdict(self)


def instance_seed(seed, index):
    """Per-instance seed derived from the suite seed (SeedSequence hash)."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1, dtype=np.uint64)[0])


def _normalized(values):
    v = np.abs(np.asarray(values, dtype=float))
    top = v.max()
    return v / top if top > 0 else v


def suite_instance(args):
    """Normalized spectra for one random game, or a failure reason."""
    seed, index, dims, iterations = args
    try:
        spec = random_instance(instance_seed(seed, index), dims=dims)
        trace = run_best_response(spec, max_k=iterations, stop_on_convergence=False)
        out = {}
        for player in (1, 2):
            plant = trace.last(player).plant
            g = gramian_pair(plant.A_bar, plant.B_bar, plant.C_bar)
            out[f"Wc{player}"] = _normalized(g.eigenvalues_c)
            out[f"Wo{player}"] = _normalized(g.eigenvalues_o)
            out[f"HSV{player}"] = _normalized(g.hankel)
        return index, out, None
    except AsymlqError as exc:
        return index, None, f"{type(exc).__name__}: {exc}"


def run_random_suite(count=100, seed=0, dims=(1, 1, 1, 1, 1), iterations=5,
                     thresholds=DEFAULT_THRESHOLDS, parallelism=1) -> SuiteStats:
    """Fraction of normalized Gramian eigenvalues / Hankel values below thresholds.

    Each spectrum is divided by its largest element and all values are pooled
    across the successful instances.  Results are folded in instance order,
    so they do not depend on ``parallelism``.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    thresholds = [float(t) for t in thresholds]
    if thresholds != sorted(thresholds, reverse=True):
        raise ValueError("thresholds must be given in descending order")
    jobs = [(seed, i, tuple(dims), iterations) for i in range(count)]
    if parallelism > 1:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            results = list(pool.map(suite_instance, jobs))
    else:
        results = [suite_instance(j) for j in jobs]
    results.sort(key=lambda r: r[0])

    pooled = {q: [] for q in QUANTITIES}
    failures = []
    for index, values, reason in results:
        if values is None:
            failures.append({"index": index, "reason": reason})
            log.info("instance %d failed: %s", index, reason)
            continue
        for q in QUANTITIES:
            pooled[q].append(values[q])
    proportions, counts = {}, {}
    for q in QUANTITIES:
        allv = np.concatenate(pooled[q]) if pooled[q] else np.empty(0)
        counts[q] = int(allv.size)
        proportions[q] = [float(np.mean(allv < t)) if allv.size else float("nan") for t in thresholds]
    return SuiteStats(instance_count=count, iterations_per_instance=iterations,
                      thresholds=thresholds, proportions=proportions, failures=failures,
                      value_counts=counts)


def write_suite(stats: SuiteStats, output_dir, seed, dims):
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = [[q] + [stats.proportions[q][i] for i in range(len(stats.thresholds))] for q in QUANTITIES]
    write_csv(out / "suite_proportions.csv",
              ["quantity"] + [f"below_{fmt(t)}" for t in stats.thresholds], rows)
    write_json(out / "suite_stats.json", stats.to_dict())
    write_json(out / "manifest.json", {
        "experiment": "random_suite",
        "seed": seed,
        "dims": list(dims),
        "instance_seed_rule": "SeedSequence([seed, index]).generate_state(1, uint64)",
        "generator": "numpy PCG64, standard normal draws",
        "covariances": "G G' + 1e-6 I with G standard normal",
        "r2_rule": "R2 = -c I, c doubled from 1 until the first maximizer response is bounded",
        "normalization": "each spectrum divided by its largest element, pooled over instances",
        "iterations": stats.iterations_per_instance,
        "tolerances": dataclasses.asdict(default_tolerances()),
        "versions": environment(),
    })
