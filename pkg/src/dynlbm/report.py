"""Run reports: JSON summary, assignment CSV and time-cluster CSV."""

from __future__ import annotations

import csv
import json
from importlib import resources
from typing import Optional, Sequence

import numpy as np

from .core import AXIS_NAMES, CountTensor, Hyperparams, TriPartition, block_stats
from .icl import icl_exact
from .search import FitResult, SearchConfig

SPEC_VERSION = 1


def load_schema() -> dict:
    return json.loads(resources.files("dynlbm").joinpath("report_schema.json").read_text(encoding="utf-8"))


def posterior_mean_rates(tensor: CountTensor, part: TriPartition, h: Hyperparams) -> np.ndarray:
    """Posterior mean (S + a) / (delta_t * R + b) of every block rate."""
    stats = block_stats(tensor, part)
    return (stats.S + h.a) / (h.delta_t * stats.R + h.b)


def _first_appearance(labels: np.ndarray) -> np.ndarray:
    _, first = np.unique(labels, return_index=True)
    order = np.argsort(first)  # old cluster ids sorted by first element
    perm = np.empty(len(order), dtype=np.int64)
    perm[order] = np.arange(len(order))
    return perm


def canonical_partition(tensor: CountTensor, part: TriPartition, h: Hyperparams) -> TriPartition:
    """Relabel rows and columns by first appearance and time clusters by
    increasing mean posterior intensity (ties by first appearance)."""
    row_perm = _first_appearance(part.c)
    col_perm = _first_appearance(part.w)
    provisional = part.relabeled([row_perm, col_perm, _first_appearance(part.y)])
    means = posterior_mean_rates(tensor, provisional, h).mean(axis=(0, 1))
    order = np.lexsort((np.arange(len(means)), means))
    time_perm = np.empty(len(order), dtype=np.int64)
    time_perm[order] = np.arange(len(order))
    return provisional.relabeled([np.arange(provisional.K), np.arange(provisional.G), time_perm])


def build_report(tensor: CountTensor, result: FitResult, cfg: SearchConfig,
                 input_info: Optional[dict] = None) -> tuple[dict, TriPartition]:
    h = cfg.hyper
    part = canonical_partition(tensor, result.partition, h)
    icl = icl_exact(tensor, part, h)
    rates = posterior_mean_rates(tensor, part, h)
    totals = tensor.interval_totals()
    report = {
        "spec_version": SPEC_VERSION,
        "config": cfg.to_dict(),
        "input": input_info or {},
        "shape": {"N": tensor.n_rows, "M": tensor.n_cols, "U": tensor.n_intervals},
        "icl": icl.as_dict(),
        "K": part.K,
        "G": part.G,
        "D": part.D,
        "n_sweeps": result.n_sweeps,
        "restart_index": result.restart_index,
        "converged": result.converged,
        "trace": [[int(i), float(v)] for i, v in result.trace],
        "row_cluster_sizes": part.sizes_A.tolist(),
        "col_cluster_sizes": part.sizes_B.tolist(),
        "time_clusters": [
            {
                "cluster": d,
                "size": int(part.sizes_C[d]),
                "mean_intensity": float(rates[:, :, d].mean()),
                "total_count": int(totals[part.y == d].sum()),
            }
            for d in range(part.D)
        ],
        "intervals": [
            {"interval": u, "cluster": int(part.y[u]), "total_count": int(totals[u])}
            for u in range(tensor.n_intervals)
        ],
    }
    return report, part


def write_report(path, report: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_assignments(path, part: TriPartition, row_ids: Optional[Sequence[str]] = None,
                      col_ids: Optional[Sequence[str]] = None) -> None:
    ids = [row_ids, col_ids, None]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["axis", "index", "id", "cluster"])
        for axis, name in enumerate(AXIS_NAMES):
            names = ids[axis]
            for idx, lab in enumerate(part.labels[axis]):
                writer.writerow([name, idx, names[idx] if names is not None else idx, int(lab)])


def read_assignments(path) -> TriPartition:
    labels = {name: {} for name in AXIS_NAMES}
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            try:
                labels[row["axis"]][int(row["index"])] = int(row["cluster"])
            except (KeyError, ValueError, TypeError):
                raise ValueError(f"malformed assignment row {row!r}") from None
    vectors = []
    for name in AXIS_NAMES:
        d = labels[name]
        if sorted(d) != list(range(len(d))) or not d:
            raise ValueError(f"assignments for axis {name!r} are missing or not contiguous")
        vectors.append([d[i] for i in range(len(d))])
    return TriPartition(*vectors)


def write_time_clusters(path, report: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["interval", "cluster", "total_count"])
        for row in report["intervals"]:
            writer.writerow([row["interval"], row["cluster"], row["total_count"]])
