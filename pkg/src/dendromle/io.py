"""Serialization of domain objects: CSV dissimilarities, JSON hierarchies.

File formats use 1-based point labels; everything in memory is 0-based.
Dissimilarity CSV: a header row holding the point count ``n``, then one
``i,j,value`` row per pair with i < j.  Dendrogram JSON: ``{"merges":
[[leafset, leafset], ...], "heights": [...]}`` with sorted leaf arrays.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import Dendrogram, Dissimilarity, Structure, pair_count, pair_index, pair_list
from .estimator import EstimateReport
from .trees import SpanningTree


def read_dissimilarity_csv(path: str | Path) -> Dissimilarity:
    """Load a dissimilarity from its CSV form; raises ValueError when malformed."""
    with open(path, newline="") as fh:
        rows = [row for row in csv.reader(fh) if row and any(f.strip() for f in row)]
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = [f for f in rows[0] if f.strip()]
    if len(header) != 1:
        raise ValueError(f"{path}: header row must hold the point count only")
    try:
        n = int(header[0])
    except ValueError:
        raise ValueError(f"{path}: point count {header[0]!r} is not an integer") from None
    if n < 2:
        raise ValueError(f"{path}: need at least 2 points")
    values = np.full(pair_count(n), np.nan)
    for row in rows[1:]:
        if len(row) != 3:
            raise ValueError(f"{path}: expected 'i,j,value' rows, got {row!r}")
        try:
            i, j, val = int(row[0]), int(row[1]), float(row[2])
        except ValueError:
            raise ValueError(f"{path}: malformed row {row!r}") from None
        if not (1 <= i < j <= n):
            raise ValueError(f"{path}: pair ({i},{j}) out of range for n={n}")
        idx = pair_index(n, i - 1, j - 1)
        if not np.isnan(values[idx]):
            raise ValueError(f"{path}: duplicate pair ({i},{j})")
        values[idx] = val
    if np.isnan(values).any():
        missing = pair_list(n)[int(np.flatnonzero(np.isnan(values))[0])]
        raise ValueError(f"{path}: missing pair ({missing[0] + 1},{missing[1] + 1})")
    return Dissimilarity(n, values)


def write_dissimilarity_csv(d: Dissimilarity, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([d.n])
        for idx, (i, j) in enumerate(pair_list(d.n)):
            writer.writerow([i + 1, j + 1, repr(float(d.values[idx]))])


def structure_to_lists(tau: Structure) -> list:
    """1-based nested-list form of the merge events."""
    return [[[leaf + 1 for leaf in cluster] for cluster in event] for event in tau.merges]


def structure_from_lists(data: Sequence) -> Structure:
    merges = tuple(
        tuple(tuple(leaf - 1 for leaf in cluster) for cluster in event) for event in data
    )
    return Structure(merges)


def dendrogram_to_dict(d: Dendrogram) -> dict:
    return {
        "merges": structure_to_lists(d.structure),
        "heights": [float(h) for h in d.heights],
    }


def dendrogram_from_dict(data: dict) -> Dendrogram:
    return Dendrogram(structure_from_lists(data["merges"]), tuple(data["heights"]))


def tree_to_list(t: SpanningTree) -> list:
    return [[i + 1, j + 1] for i, j in t.edges]


def report_to_dict(report: EstimateReport) -> dict:
    return {
        "scale": report.scale,
        "chosen": structure_to_lists(report.chosen),
        "baseline": structure_to_lists(report.baseline),
        "ranked": [
            {"structure": structure_to_lists(tau), "log_likelihood": value}
            for tau, value in report.ranked
        ],
    }


def dump_json(payload: dict | list, path: str | Path | None = None) -> str:
    text = json.dumps(payload, indent=2)
    if path is not None:
        Path(path).write_text(text + "\n")
    return text


def write_histogram_csv(path: str | Path, bin_edges: np.ndarray, mean_counts: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_lo", "bin_hi", "mean_count"])
        for lo, hi, c in zip(bin_edges[:-1], bin_edges[1:], mean_counts):
            writer.writerow([repr(float(lo)), repr(float(hi)), repr(float(c))])


def write_ranks_csv(
    path: str | Path, rank_counts: dict, n_measurements: int, n_structures: int
) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rank", "probability"])
        for rank in range(1, n_structures + 1):
            p = rank_counts.get(rank, 0) / n_measurements
            writer.writerow([rank, repr(float(p))])
        unranked = rank_counts.get("unranked", 0) / n_measurements
        writer.writerow(["unranked", repr(float(unranked))])


def write_compare_csv(path: str | Path, rows: Iterable[tuple[float, float, float]]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["noise_std", "mle_rate", "slhc_rate"])
        for noise_std, mle_rate, slhc_rate in rows:
            writer.writerow(
                [repr(float(noise_std)), repr(float(mle_rate)), repr(float(slhc_rate))]
            )
