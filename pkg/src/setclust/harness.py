"""Experiment runner: constraint generation, ratio sweeps over seeds, metric
aggregation, and the pairwise-equivalent query comparison.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from setclust import clustering, constraints, geometry, metrics
from setclust.constraints import CLSet, ConstraintCollection, MLSet
from setclust.dataset import EmbeddedDataset
from setclust.oracle import QueryLedger, RemoteOracle, SimulatedOracle

ALGORITHMS = ("lsck_hc", "lsck", "kmeanspp")


@dataclass
class ExperimentConfig:
    k: int
    algorithm: str = "lsck_hc"
    ratios: list[float] = field(default_factory=lambda: [0.2])
    seeds: list[int] = field(default_factory=lambda: list(range(10)))
    penalties: str | tuple[float, float] = "auto"
    oracle_error_rate: float = 0.0
    oracle_seed: int = 0
    oracle_backend: str = "sim"
    oracle_model: str = ""
    m_max: int = constraints.DEFAULT_M_MAX
    tol: float | None = None
    max_iters: int = 100
    mix_seed: int = 0

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}")
        if not self.seeds:
            raise ValueError("seeds must be nonempty")
        if any(not 0.0 <= r <= 1.0 for r in self.ratios):
            raise ValueError("ratios must lie in [0, 1]")


def make_oracle(config: ExperimentConfig, data: EmbeddedDataset,
                transcript_path: str | None = None) -> SimulatedOracle | RemoteOracle:
    ledger = QueryLedger(keep_transcripts=transcript_path is not None)
    if config.oracle_backend == "sim":
        labels = {r.id: r.label for r in data.records}
        if any(v is None for v in labels.values()):
            raise ValueError("simulated oracle needs a labeled dataset")
        return SimulatedOracle(labels, error_rate=config.oracle_error_rate,
                               seed=config.oracle_seed, ledger=ledger)
    if config.oracle_backend == "remote":
        return RemoteOracle(model=config.oracle_model, ledger=ledger,
                            transcript_path=transcript_path)
    raise ValueError(f"unknown oracle backend {config.oracle_backend!r}")


def generate_constraints(data: EmbeddedDataset, oracle, k: int, seed: int,
                         m_max: int = constraints.DEFAULT_M_MAX,
                         max_cl_sets: int | None = "auto") -> ConstraintCollection:
    """Stage 1: grid-driven ML candidates, thresholds, and radius-gated CL sets.

    ``max_cl_sets`` defaults to k, which bounds the membership-query budget
    while still giving the local search cross-cluster separation evidence;
    pass None to grow CL sets until every point is covered.
    """
    if max_cl_sets == "auto":
        max_cl_sets = k
    kcr = geometry.gonzalez_kcenter(data, k, seed)
    if kcr.cost == 0:
        levels = [0.0]
    else:
        levels = geometry.grid_levels(kcr.cost, data.n, data.dim)
    grid = geometry.grid_partition(data, levels, kcr)
    ml_candidates = constraints.generate_ml_sets(data, oracle, grid, m_max=m_max)
    covered = {m for s in ml_candidates for m in s.members}
    uncovered = sorted(set(range(data.n)) - covered)
    ml_candidates = constraints.consolidate_ml_sets(data, oracle, ml_candidates,
                                                    kcr.cost,
                                                    extra_points=uncovered,
                                                    m_max=m_max)
    thresholds = constraints.compute_hard_thresholds(data, oracle, ml_candidates)
    ml_sets = constraints.classify_hard_soft(ml_candidates, thresholds)
    cl_sets, rejections = constraints.generate_cl_sets(data, oracle, kcr.cost, k, seed,
                                                       max_sets=max_cl_sets)
    ledger = oracle.ledger
    return ConstraintCollection(
        ml_sets=ml_sets,
        cl_sets=cl_sets,
        meta={
            "ml_queries": ledger.ml_queries,
            "cl_queries": ledger.cl_queries,
            "consistency_queries": ledger.consistency_queries,
            "cl_rejections": rejections,
            "psi_pair": thresholds.psi_pair,
            "psi_set": thresholds.psi_set,
            "cost_kc": kcr.cost,
            "k": k,
            "seed": seed,
        },
    )


def fsc_equivalent_queries(ml_sets: list[MLSet], cl_sets: list[CLSet],
                           cl_rejections: int = 0) -> int:
    """Pairwise-query cost of reproducing the same constraints one pair at a time.

    Each ML set of size m would take C(m, 2) pairwise probes; growing a CL
    set to size s takes C(s, 2) accepted probes plus one probe per rejected
    candidate.
    """
    total = sum(math.comb(len(s.members), 2) for s in ml_sets)
    total += sum(math.comb(len(s.members), 2) for s in cl_sets)
    return total + cl_rejections


def run_algorithm(data: EmbeddedDataset, collection: ConstraintCollection,
                  config: ExperimentConfig, seed: int) -> clustering.ClusteringResult:
    conv = clustering.Convergence(tol=config.tol, max_iters=config.max_iters)
    if config.penalties == "auto":
        pen = None
    else:
        pen = clustering.Penalties(*config.penalties)
    if config.algorithm == "lsck_hc":
        return clustering.lsck_hc(data, collection, pen, config.k, seed, conv)
    if config.algorithm == "lsck":
        return clustering.lsck(data, collection, pen, config.k, seed, conv)
    return clustering.kmeans_baseline(data, config.k, seed, conv)


def result_to_doc(result: clustering.ClusteringResult, config: ExperimentConfig,
                  ratio: float, seed: int) -> dict:
    return {
        "assignment": result.labels.tolist(),
        "centers": result.centers.tolist(),
        "objective": result.objective,
        "iterations": result.iterations,
        "converged": result.converged,
        "seed": seed,
        "config": {
            "algorithm": config.algorithm,
            "k": config.k,
            "ratio": ratio,
            "penalties": ("auto" if config.penalties == "auto" else list(config.penalties)),
            "tol": config.tol,
            "max_iters": config.max_iters,
        },
    }


def run_experiment(data: EmbeddedDataset, pool: ConstraintCollection,
                   config: ExperimentConfig, out_dir: str | Path) -> list[Path]:
    """One result file per (ratio, seed); constraints are mixed per ratio."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for ratio in config.ratios:
        mixed = constraints.mix_constraints(pool.ml_sets, pool.cl_sets, ratio,
                                            data.n, config.mix_seed)
        mixed.meta.update({k: v for k, v in pool.meta.items() if k != "target_ratio"})
        for seed in config.seeds:
            result = run_algorithm(data, mixed, config, seed)
            doc = result_to_doc(result, config, ratio, seed)
            doc["mixed_meta"] = mixed.meta
            doc["mixed_ml"] = [list(s.members) for s in mixed.ml_sets]
            doc["mixed_cl"] = [list(s.members) for s in mixed.cl_sets]
            path = out_dir / f"result_{config.algorithm}_r{ratio:.2f}_s{seed}.json"
            path.write_text(json.dumps(doc, sort_keys=True) + "\n", encoding="utf-8")
            written.append(path)
    return written


def evaluate_results(data: EmbeddedDataset, result_dir: str | Path) -> list[Path]:
    """Write a metrics sidecar for every result file against dataset labels."""
    truth = data.labels()
    written = []
    for path in sorted(Path(result_dir).glob("result_*.json")):
        if path.name.endswith(".metrics.json"):
            continue
        doc = json.loads(path.read_text(encoding="utf-8"))
        pred = np.array(doc["assignment"], dtype=np.int64)
        mixed = ConstraintCollection(
            ml_sets=[MLSet(members=tuple(m)) for m in doc.get("mixed_ml", []) if len(m) >= 2],
            cl_sets=[CLSet(members=tuple(m)) for m in doc.get("mixed_cl", []) if len(m) >= 2],
        )
        scores = {
            "acc": metrics.acc_hungarian(pred, truth),
            "nmi": metrics.nmi(pred, truth),
            "ri": metrics.rand_index(pred, truth),
            "ari": metrics.ari(pred, truth),
            "constraint_ri": metrics.constraint_ri(mixed, truth),
            "objective": doc["objective"],
            "iterations": doc["iterations"],
            "algorithm": doc["config"]["algorithm"],
            "ratio": doc["config"]["ratio"],
            "seed": doc["seed"],
            "fsc_equiv_queries": fsc_equivalent_queries(
                mixed.ml_sets, mixed.cl_sets,
                doc.get("mixed_meta", {}).get("cl_rejections", 0)),
            "ledger_total": (doc.get("mixed_meta", {}).get("ml_queries", 0)
                             + doc.get("mixed_meta", {}).get("cl_queries", 0)
                             + doc.get("mixed_meta", {}).get("consistency_queries", 0)),
        }
        side = path.with_suffix(".metrics.json")
        side.write_text(json.dumps(scores, sort_keys=True) + "\n", encoding="utf-8")
        written.append(side)
    return written


def write_report(result_dir: str | Path, out_csv: str | Path) -> list[dict]:
    """Aggregate metric sidecars into CSV rows plus a query-comparison table.

    Rows carry (algorithm, ratio, metric, mean, stddev, n_seeds) at 4-decimal
    precision; the query table compares the generation ledger with the
    pairwise-equivalent count per ratio.
    """
    cells: dict[tuple[str, float], list[dict]] = {}
    for path in sorted(Path(result_dir).glob("*.metrics.json")):
        doc = json.loads(path.read_text(encoding="utf-8"))
        cells.setdefault((doc["algorithm"], doc["ratio"]), []).append(doc)
    rows = []
    for (algorithm, ratio), docs in sorted(cells.items()):
        for metric in ("acc", "nmi", "ri", "ari", "objective"):
            values = [d[metric] for d in docs]
            rows.append({
                "algorithm": algorithm,
                "ratio": f"{ratio:.4f}",
                "metric": metric,
                "mean": f"{float(np.mean(values)):.4f}",
                "stddev": f"{float(np.std(values)):.4f}",
                "n_seeds": len(docs),
            })
        ledger_total = docs[0]["ledger_total"]
        fsc = docs[0]["fsc_equiv_queries"]
        reduction = fsc / ledger_total if ledger_total else 0.0
        rows.append({
            "algorithm": algorithm, "ratio": f"{ratio:.4f}", "metric": "query_reduction",
            "mean": f"{reduction:.4f}", "stddev": "0.0000", "n_seeds": len(docs),
        })
        rows.append({
            "algorithm": algorithm, "ratio": f"{ratio:.4f}", "metric": "constraint_ri",
            "mean": f"{float(np.mean([d['constraint_ri'] for d in docs])):.4f}",
            "stddev": f"{float(np.std([d['constraint_ri'] for d in docs])):.4f}",
            "n_seeds": len(docs),
        })
    with open(out_csv, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=["algorithm", "ratio", "metric",
                                                "mean", "stddev", "n_seeds"])
        writer.writeheader()
        writer.writerows(rows)
    return rows
