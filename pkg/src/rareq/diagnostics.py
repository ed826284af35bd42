"""Batch-means standard deviations of the centroid estimators, and cell masses."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .quantizer import SampleBatch, as_codebook, assign_cells, is_centroids, sort_codebook


@dataclass
class CellStd:
    cell: int
    centroid: np.ndarray
    std: np.ndarray | None  # None when fewer than two batches hit the cell
    effective_batches: int


@dataclass
class CentroidStdReport:
    """``cells[i]`` lists the per-cell results for the i-th codebook (sorted)."""

    codebooks: list[np.ndarray]
    cells: list[list[CellStd]]
    nv: int
    n_batches: int

    def std_table(self, which: int = 0) -> np.ndarray:
        """``(n_cells, d)`` array of stds for one codebook; NaN for missing cells."""
        d = self.codebooks[which].shape[1]
        return np.array([c.std if c.std is not None else np.full(d, np.nan)
                         for c in self.cells[which]])


def std_centroid(data: SampleBatch, prototypes_list: Sequence, cells: Iterable[int] | None = None,
                 nv: int = 1000, threads: int = 1) -> CentroidStdReport:
    """Standard deviation of the IS centroid estimator at sample size ``nv``.

    The first ``B * nv`` rows (``B = n // nv``) are cut into ``B`` consecutive
    batches. In each batch the centroids of the *fixed* codebook cells are
    estimated; the per-coordinate sample std (``ddof=1``) is taken over the
    batches where the cell received positive weight.

    Codebooks are sorted by increasing first coordinate before use and
    ``cells`` indexes that sorted order (0-based). ``None`` means all cells.
    """
    if nv < 1:
        raise ValueError(f"nv must be >= 1, got {nv}")
    n_batches = data.n // nv
    if n_batches < 2:
        raise ValueError(f"need at least 2 batches: n={data.n}, nv={nv} gives {n_batches}")

    codebooks = [sort_codebook(as_codebook(cb, data.dim)) for cb in prototypes_list]
    if not codebooks:
        raise ValueError("prototypes_list is empty")
    cell_lists = []
    for cb in codebooks:
        wanted = list(range(len(cb))) if cells is None else [int(c) for c in cells]
        for c in wanted:
            if not 0 <= c < len(cb):
                raise ValueError(f"cell index {c} out of range for a codebook of {len(cb)} cells")
        cell_lists.append(wanted)

    def one_batch(b):
        chunk = data[slice(b * nv, (b + 1) * nv)]
        return [is_centroids(chunk, cb) for cb in codebooks]

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_batch = list(pool.map(one_batch, range(n_batches)))
        # ordering by batch index is fixed by pool.map
    else:
        per_batch = [one_batch(b) for b in range(n_batches)]

    out = []
    for i, (cb, wanted) in enumerate(zip(codebooks, cell_lists)):
        rows = []
        for c in wanted:
            hits = np.array([est[i].centroids[c] for est in per_batch if not est[i].empty[c]])
            n_eff = len(hits)
            std = _sample_std(hits) if n_eff >= 2 else None
            rows.append(CellStd(cell=c, centroid=cb[c].copy(), std=std, effective_batches=n_eff))
        out.append(rows)
    return CentroidStdReport(codebooks=codebooks, cells=out, nv=nv, n_batches=n_batches)


def _sample_std(values: np.ndarray) -> np.ndarray:
    """Per-column std with ddof=1, shifted by the first row (exactly 0 for constant columns)."""
    dev = values - values[0]
    b = len(values)
    out = []
    for col in dev.T:
        s1 = math.fsum(col.tolist())
        s2 = math.fsum((col * col).tolist())
        out.append(math.sqrt(max(s2 - s1 * s1 / b, 0.0) / (b - 1)))
    return np.array(out)


def estimate_cell_masses(batch: SampleBatch, codebook, threads: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Cell probabilities ``(normalized, unnormalized)`` in the codebook's order.

    The unnormalized mass ``(1/n) sum_k w_k 1{Y_k in C_j}`` is unbiased under
    IS; the normalized one divides by ``(1/n) sum_k w_k``.
    """
    cb = as_codebook(codebook, batch.dim)
    assignment = assign_cells(batch.points, cb, threads)
    raw = np.array([math.fsum(batch.weights[assignment == j]) for j in range(len(cb))]) / batch.n
    total = math.fsum(batch.weights) / batch.n
    normalized = raw / total if total > 0 else np.zeros_like(raw)
    return normalized, raw
