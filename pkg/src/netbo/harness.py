"""Experiment orchestration: initial designs, the optimization loop per method,
replications (optionally across processes), and persistent run artifacts."""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from multiprocessing import get_context
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import __version__
from .acquisition import FlatGPModel, Method, SAAConfig, fit_flat_model, suggest
from .errors import IOFailure, NetboError
from .netmodel import NetworkModel, fit_network_model, ingest
from .network import NetworkProblem, evaluate_network, get_problem
from .acquisition import feasible_uniform

# Regret smaller than this is reported as exact convergence (blank log column).
REGRET_FLOOR = 1e-12


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce an experiment bit for bit."""

    problem_id: str
    method: Method
    budget: int
    replications: int
    base_seed: int = 0
    saa: SAAConfig = field(default_factory=SAAConfig)
    output_dir: Optional[str] = None
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass
class RunTrace:
    """Per-iteration record of one replication; wall-clock is the only
    nondeterministic content."""

    problem_id: str
    method: Method
    rep_index: int
    points: np.ndarray  # (rows, D)
    node_values: np.ndarray  # (rows, K)
    best: np.ndarray  # (rows,)
    wall_ms: np.ndarray  # (rows,)

    @property
    def rows(self) -> int:
        return self.points.shape[0]

    @property
    def final_best(self) -> float:
        return float(self.best[-1])


def _stream_seed(*entropy) -> int:
    return int(np.random.SeedSequence([e & 0x7FFFFFFF for e in entropy]).generate_state(1)[0])


def initial_design(problem: NetworkProblem, seed: int) -> np.ndarray:
    """2(D+1) uniform feasible points, deterministic given the seed."""
    n = 2 * (problem.decision_dim + 1)
    rng = np.random.default_rng(seed)
    return feasible_uniform(problem, rng, n)


def run_replication(cfg: ExperimentConfig, rep_index: int) -> RunTrace:
    """One full optimization run: evaluate the initial design, then repeat
    fit -> suggest -> evaluate -> ingest for ``budget`` iterations.

    The replication seed is base_seed + rep_index and the design stream depends
    only on it, so all methods start from the identical design.
    """
    problem = get_problem(cfg.problem_id)
    rep_seed = cfg.base_seed + rep_index
    design = initial_design(problem, _stream_seed(rep_seed, 11))

    points, values, best, wall = [], [], [], []
    best_so_far = -math.inf
    for x in design:
        t0 = time.perf_counter()
        h = evaluate_network(problem, x)
        wall.append(1e3 * (time.perf_counter() - t0))
        points.append(x)
        values.append(h)
        best_so_far = max(best_so_far, h[-1])
        best.append(best_so_far)

    model: Optional[NetworkModel] = None
    flat: Optional[FlatGPModel] = None
    if cfg.method is Method.EIFN:
        model = fit_network_model(problem, points, values, _stream_seed(rep_seed, 13, 0))
    elif cfg.method is Method.EI:
        flat = fit_flat_model(problem, points, values, _stream_seed(rep_seed, 13, 0))

    for it in range(1, cfg.budget + 1):
        t0 = time.perf_counter()
        rng = np.random.default_rng(np.random.SeedSequence([rep_seed & 0x7FFFFFFF, 17, it]))
        try:
            if cfg.method is Method.EIFN:
                x_next = suggest(Method.EIFN, model, cfg.saa, rng)
            elif cfg.method is Method.EI:
                x_next = suggest(Method.EI, flat, cfg.saa, rng)
            else:
                x_next = suggest(Method.RANDOM, problem, cfg.saa, rng)
            x_next = problem.bounds.clip(x_next)
            h = evaluate_network(problem, x_next)
            fit_seed = _stream_seed(rep_seed, 13, it)
            if cfg.method is Method.EIFN:
                model = ingest(model, x_next, h, fit_seed)
            elif cfg.method is Method.EI:
                flat = fit_flat_model(
                    problem,
                    np.vstack(points + [x_next]),
                    np.vstack(values + [h]),
                    fit_seed,
                )
        except NetboError as exc:
            raise type(exc)(f"iteration {it} of replication {rep_index}: {exc}") from exc
        wall.append(1e3 * (time.perf_counter() - t0))
        points.append(x_next)
        values.append(h)
        best_so_far = max(best_so_far, h[-1])
        best.append(best_so_far)

    return RunTrace(
        problem_id=cfg.problem_id,
        method=cfg.method,
        rep_index=rep_index,
        points=np.vstack(points),
        node_values=np.vstack(values),
        best=np.asarray(best),
        wall_ms=np.asarray(wall),
    )


def _worker_init():
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, "1")


def _run_rep(args) -> RunTrace:
    cfg, rep_index = args
    return run_replication(cfg, rep_index)


def run_experiment(cfg: ExperimentConfig) -> List[RunTrace]:
    """All replications of an experiment, optionally spread over processes.

    Each replication is a pure function of (config, rep_index), so the worker
    count affects wall-clock only.
    """
    reps = list(range(cfg.replications))
    if cfg.workers == 1 or cfg.replications == 1:
        return [run_replication(cfg, r) for r in reps]
    ctx = get_context("spawn")
    with ProcessPoolExecutor(
        max_workers=min(cfg.workers, cfg.replications),
        mp_context=ctx,
        initializer=_worker_init,
    ) as pool:
        return list(pool.map(_run_rep, [(cfg, r) for r in reps]))


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def _format(v: float) -> str:
    return repr(float(v))


def write_results(traces: List[RunTrace], cfg: ExperimentConfig) -> List[Path]:
    """Write one CSV per replication plus a manifest and a cross-replication
    summary; returns the created paths.

    The summary holds the per-iteration mean and standard error of best-so-far,
    and of log10 regret when the problem's reference optimum is known; regret at
    or below 1e-12 counts as converged and leaves the log column blank.
    """
    if not traces:
        raise ValueError("need at least one trace")
    if cfg.output_dir is None:
        raise ValueError("config has no output_dir")
    problem = get_problem(cfg.problem_id)
    out = Path(cfg.output_dir)
    written = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        dim = problem.decision_dim
        n_nodes = problem.node_count
        header = (
            ["iter"]
            + [f"x_{d}" for d in range(dim)]
            + [f"h_{k}" for k in range(1, n_nodes + 1)]
            + ["best", "wall_ms"]
        )
        for trace in traces:
            path = out / f"trace_rep{trace.rep_index:03d}.csv"
            with path.open("w") as fh:
                fh.write(",".join(header) + "\n")
                for i in range(trace.rows):
                    row = (
                        [str(i)]
                        + [_format(v) for v in trace.points[i]]
                        + [_format(v) for v in trace.node_values[i]]
                        + [_format(trace.best[i]), f"{trace.wall_ms[i]:.3f}"]
                    )
                    fh.write(",".join(row) + "\n")
            written.append(path)

        manifest = {
            "library_version": __version__,
            "problem_id": cfg.problem_id,
            "method": cfg.method.value,
            "budget": cfg.budget,
            "replications": cfg.replications,
            "base_seed": cfg.base_seed,
            "replication_seeds": [cfg.base_seed + t.rep_index for t in traces],
            "saa": asdict(cfg.saa),
            "decision_dim": dim,
            "node_count": n_nodes,
            "reference_optimum": problem.reference_optimum,
            "rows_per_trace": traces[0].rows,
        }
        manifest_path = out / "manifest.json"
        manifest_path.write_text(json.dumps(manifest, indent=2) + "\n")
        written.append(manifest_path)

        summary_path = out / "summary.csv"
        ref = problem.reference_optimum
        rows = traces[0].rows
        best_mat = np.vstack([t.best for t in traces])  # (R, rows)
        with summary_path.open("w") as fh:
            fh.write("iter,best_mean,best_se,log10_regret_mean,log10_regret_se\n")
            r_count = len(traces)
            for i in range(rows):
                col = best_mat[:, i]
                mean = float(np.mean(col))
                se = float(np.std(col, ddof=1) / math.sqrt(r_count)) if r_count > 1 else 0.0
                cells = [str(i), _format(mean), _format(se)]
                if ref is not None:
                    logs = [
                        math.log10(ref - b) for b in col if ref - b > REGRET_FLOOR
                    ]
                    if logs:
                        lmean = float(np.mean(logs))
                        lse = (
                            float(np.std(logs, ddof=1) / math.sqrt(len(logs)))
                            if len(logs) > 1
                            else 0.0
                        )
                        cells += [_format(lmean), _format(lse)]
                    else:
                        cells += ["", ""]
                else:
                    cells += ["", ""]
                fh.write(",".join(cells) + "\n")
        written.append(summary_path)
    except OSError as exc:
        raise IOFailure(f"failed writing results to {out}: {exc}") from exc
    return written
