"""Experiment grids: parsing, per-trial execution and resumable CSV sweeps.

Grid files are flat ``key=value`` text, one pair per line, ``#`` comments.
List-valued keys take comma-separated values::

    algorithm=private-pivot
    n=50,100,200
    eps=0.4
    delta=0.01
    flip=0.02
    cluster_size=auto
    trials=5
    base_seed=0

Every trial's seed is derived from ``(base_seed, cell index, trial index)``.
"""

from __future__ import annotations

import csv
import hashlib
import itertools
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from .dp import PrivacyParams, make_rng
from .graph import SignedGraph, disagreement, generate_planted
from .oracle import BRUTE_FORCE_LIMIT, additive_budget, brute_force_opt, pivot_baseline
from .pivot import privacy_report, run_private_pivot
from .records import CSV_FIELDS, ExperimentRecord, config_hash, write_csv
from .release import ReleaseConfig, cluster_general

ALGORITHMS = ("private-pivot", "pivot-baseline", "general/pivot", "general/local-search")
_DEFAULTS = {
    "algorithm": "private-pivot", "n": "50", "eps": "0.4", "delta": "0.01", "flip": "0.02",
    "cluster_size": "auto", "trials": "1", "base_seed": "0", "noise": "true", "oracle": "true",
}


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class Cell:
    algorithm: str
    n: int
    epsilon: float
    delta: float
    flip: float
    cluster_size: str
    noise: bool
    oracle: bool

    def cluster_sizes(self):
        return planted_sizes(self.n, self.cluster_size)

    def config(self, seed):
        return {"algorithm": self.algorithm, "n": self.n, "epsilon": self.epsilon,
                "delta": self.delta, "flip": self.flip, "cluster_sizes": self.cluster_sizes(),
                "noise": self.noise, "seed": seed}


@dataclass(frozen=True)
class Grid:
    cells: tuple
    trials: int
    base_seed: int


def planted_sizes(n, spec="auto"):
    """Cluster sizes summing to ``n``; ``auto`` uses size ``ceil(sqrt(n) ln n)``."""
    if spec == "auto":
        size = max(1, math.ceil(math.sqrt(n) * math.log(max(n, 2))))
    else:
        size = int(spec)
    if size <= 0:
        raise GridError(f"cluster size must be positive, got {spec!r}")
    sizes = [size] * (n // size)
    if n % size:
        sizes.append(n % size)
    return sizes


def _bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise GridError(f"expected a boolean, got {text!r}")


def parse_grid(text):
    values = dict(_DEFAULTS)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise GridError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _DEFAULTS:
            raise GridError(f"line {lineno}: unknown key {key!r}")
        values[key] = value
    try:
        algorithm = values["algorithm"]
        if algorithm not in ALGORITHMS:
            raise GridError(f"unknown algorithm {algorithm!r}; choose from {ALGORITHMS}")
        ns = [int(v) for v in values["n"].split(",")]
        epss = [float(v) for v in values["eps"].split(",")]
        deltas = [float(v) for v in values["delta"].split(",")]
        flips = [float(v) for v in values["flip"].split(",")]
        trials = int(values["trials"])
        base_seed = int(values["base_seed"])
        noise = _bool(values["noise"])
        oracle = _bool(values["oracle"])
    except ValueError as exc:
        raise GridError(str(exc)) from None
    if trials < 1:
        raise GridError("trials must be at least 1")
    cells = tuple(Cell(algorithm, n, e, d, f, values["cluster_size"], noise, oracle)
                  for n, e, d, f in itertools.product(ns, epss, deltas, flips))
    return Grid(cells, trials, base_seed)


def trial_seed(base_seed, cell_index, trial_index):
    """63-bit seed from a hash of ``(base_seed, cell, trial)``."""
    digest = hashlib.sha256(f"{base_seed}:{cell_index}:{trial_index}".encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def run_trial(cell, seed, timing=False):
    """Run one trial and return its :class:`ExperimentRecord`."""
    start = time.perf_counter()
    sizes = cell.cluster_sizes()
    g, truth = generate_planted(cell.n, sizes, cell.flip, [seed, 0])
    rec = ExperimentRecord(
        config_hash=config_hash(cell.config(seed)), algorithm=cell.algorithm, n=cell.n,
        seed=seed, cluster_sizes=" ".join(map(str, sizes)), flip_prob=cell.flip,
        epsilon=cell.epsilon, delta=cell.delta,
        true_max_degree=int(g.positive_degrees().max()) if cell.n else 0,
    )
    alg_seed = [seed, 1]
    if cell.algorithm == "private-pivot":
        out, diag = run_private_pivot(g, cell.epsilon, cell.delta, alg_seed, noise=cell.noise,
                                      track_r=False)
        rec.c_l = diag.params.c_l
        rec.additive_budget = additive_budget(cell.n, rec.c_l, cell.epsilon, cell.delta)
        if cell.noise:
            report = privacy_report(diag)
            rec.eps_total, rec.delta_total = report.epsilon_total, report.delta_total
            rec.budget_ok = report.budget_ok
    elif cell.algorithm == "pivot-baseline":
        out = pivot_baseline(g, make_rng(alg_seed))
    else:
        strategy = cell.algorithm.split("/", 1)[1]
        general = SignedGraph.from_signed_weights(g.signed)
        cfg = ReleaseConfig(PrivacyParams(cell.epsilon), seed=trial_seed(seed, 0, 1))
        out, grec = cluster_general(general, cfg, strategy)
        rec.dis_release = grec.dis_release
        rec.eps_total, rec.delta_total = grec.eps_total, grec.delta_total
    rec.dis_output = disagreement(out, g)
    rec.dis_truth = disagreement(truth, g)
    rec.excess = rec.dis_output - rec.dis_truth
    if cell.oracle and cell.n <= BRUTE_FORCE_LIMIT:
        rec.dis_oracle = brute_force_opt(g).value
    if timing:
        rec.wall_ms = (time.perf_counter() - start) * 1e3
    return rec


def _run_job(job):
    cell, seed, timing = job
    return run_trial(cell, seed, timing)


def _completed_hashes(path):
    """Config hashes already in ``path``; ``None`` when the file is missing or empty."""
    if not os.path.exists(path) or os.path.getsize(path) == 0:
        return None
    with open(path, newline="") as fh:
        rows = csv.reader(fh)
        header = next(rows)
        if header != CSV_FIELDS:
            raise GridError(f"{path}: existing file has a different CSV schema")
        idx = header.index("config_hash")
        return {row[idx] for row in rows if row}


def run_sweep(grid, out_path, jobs=1, timing=False):
    """Run every (cell, trial) in order, appending rows not already in ``out_path``.

    Returns the number of rows written by this call.
    """
    done = _completed_hashes(out_path)
    fresh = done is None
    done = done or set()
    pending = []
    for ci, cell in enumerate(grid.cells):
        for ti in range(grid.trials):
            seed = trial_seed(grid.base_seed, ci, ti)
            if config_hash(cell.config(seed)) not in done:
                pending.append((cell, seed, timing))
    try:
        fh = open(out_path, "a", newline="")
    except OSError as exc:
        raise GridError(f"cannot write {out_path}: {exc}") from None
    with fh:
        if fresh:
            write_csv([], fh, header=True)
        if jobs > 1 and len(pending) > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                for rec in pool.map(_run_job, pending):
                    write_csv([rec], fh, header=False)
                    fh.flush()
        else:
            for job in pending:
                write_csv([_run_job(job)], fh, header=False)
                fh.flush()
    return len(pending)
