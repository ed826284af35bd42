"""Lloyd's algorithm with importance-sampling weights.

The centroid of cell ``j`` is the self-normalized ratio

    sum_k Y_k 1{Y_k in C_j} w_k  /  sum_k 1{Y_k in C_j} w_k

and the distortion is ``(1/n) sum_k w_k min_j |Y_k - gamma_j|^2``. All sums
go through ``math.fsum`` so the result does not depend on row order or on
how the data is chunked.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

ASSIGN_CHUNK = 16384


class DegenerateInputError(ValueError):
    """The batch cannot support the requested number of cells."""


@dataclass
class SampleBatch:
    """Output points ``(n, d)`` with one nonnegative IS weight per row."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ValueError(f"points must be a non-empty (n, d) array, got shape {pts.shape}")
        if len(w) != len(pts):
            raise ValueError(f"{len(pts)} points but {len(w)} weights")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValueError("weights must be finite and nonnegative")
        self.points = pts
        self.weights = w

    @classmethod
    def unit(cls, points) -> "SampleBatch":
        pts = np.asarray(points, dtype=float)
        return cls(pts, np.ones(len(pts)))

    @property
    def n(self) -> int:
        return len(self.points)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __getitem__(self, idx) -> "SampleBatch":
        return SampleBatch(self.points[idx], self.weights[idx])


@dataclass(frozen=True)
class LloydConfig:
    nb_cells: int
    multistart: int = 1
    max_iter: int = 100
    tol: float = 1e-8
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.nb_cells < 1:
            raise ValueError("nb_cells must be >= 1")
        if self.multistart < 1:
            raise ValueError("multistart must be >= 1")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not self.tol >= 0:
            raise ValueError("tol must be nonnegative")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")


@dataclass
class QuantizationResult:
    """Discrete approximation: prototypes, their masses and the fit trace.

    ``history`` holds the distortion of the initial codebook followed by the
    distortion after every update of the winning run; ``recovered[i]`` tells
    whether update ``i`` relocated an empty cell.
    """

    codebook: np.ndarray
    masses: np.ndarray
    distortion: float
    iterations: list[int]
    assignment: np.ndarray
    converged: bool
    history: list[float] = field(default_factory=list)
    recovered: list[bool] = field(default_factory=list)
    start_distortions: list[float] = field(default_factory=list)


@dataclass
class CentroidEstimate:
    centroids: np.ndarray  # NaN rows for empty cells
    denominators: np.ndarray  # (1/n) sum of weights in each cell
    empty: np.ndarray

    @property
    def masses(self) -> np.ndarray:
        total = math.fsum(self.denominators)
        if total <= 0:
            return np.zeros_like(self.denominators)
        return self.denominators / total


def as_codebook(codebook, dim: int | None = None) -> np.ndarray:
    cb = np.asarray(codebook, dtype=float)
    if cb.ndim == 1:
        cb = cb.reshape(-1, 1) if dim == 1 else cb.reshape(1, -1)
    if cb.ndim != 2 or cb.shape[0] < 1:
        raise ValueError("codebook must contain at least one prototype")
    if dim is not None and cb.shape[1] != dim:
        raise ValueError(f"codebook dimension {cb.shape[1]} does not match data dimension {dim}")
    if not np.all(np.isfinite(cb)):
        raise ValueError("prototypes must be finite")
    return cb


def sort_order(codebook: np.ndarray) -> np.ndarray:
    """Cell order by increasing first coordinate, later coordinates break ties."""
    cb = np.asarray(codebook)
    return np.lexsort(cb.T[::-1])


def sort_codebook(codebook) -> np.ndarray:
    cb = as_codebook(codebook)
    return cb[sort_order(cb)]


def _sq_dists(points: np.ndarray, codebook: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - codebook[None, :, :]
    return np.einsum("nmd,nmd->nm", diff, diff)


def _min_sq_dists(points: np.ndarray, codebook: np.ndarray) -> np.ndarray:
    return np.min(_sq_dists(points, codebook), axis=1)


def nearest(points, codebook, threads: int = 1, chunk_size: int = ASSIGN_CHUNK):
    """``(index, squared distance)`` of the nearest prototype for every row.

    Ties go to the lowest index. Chunks may run on a thread pool; results are
    concatenated in chunk order.
    """
    pts = np.asarray(points, dtype=float)
    cb = as_codebook(codebook, pts.shape[1])
    starts = range(0, len(pts), chunk_size)

    def one(s):
        d2 = _sq_dists(pts[s:s + chunk_size], cb)
        idx = np.argmin(d2, axis=1)
        return idx, d2[np.arange(len(idx)), idx]

    if threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(one, starts))
    else:
        parts = [one(s) for s in starts]
    if not parts:
        return np.zeros(0, dtype=np.intp), np.zeros(0)
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def assign_cells(points, codebook, threads: int = 1) -> np.ndarray:
    """Nearest-prototype index for every row; ties go to the lowest index."""
    return nearest(points, codebook, threads)[0]


def assign_cell(y, codebook) -> int:
    y = np.asarray(y, dtype=float).reshape(1, -1)
    return int(assign_cells(y, codebook)[0])


def weighted_distortion(batch: SampleBatch, codebook) -> float:
    """``(1/n) sum_k w_k min_j |Y_k - gamma_j|^2``."""
    cb = as_codebook(codebook, batch.dim)
    return _distortion(batch, _min_sq_dists(batch.points, cb))


def _distortion(batch: SampleBatch, d2: np.ndarray) -> float:
    return math.fsum((batch.weights * d2).tolist()) / batch.n


@dataclass
class Accumulator:
    """Running per-cell sums for one fixed codebook.

    Each chunk contributes exactly-rounded partial sums; finalization sums
    the partials again with ``fsum``, so any chunking of the same rows gives
    the same centroids up to a few ulps.
    """

    codebook: np.ndarray
    numerators: list[np.ndarray] = field(default_factory=list)
    denominators: list[np.ndarray] = field(default_factory=list)
    count: int = 0

    @classmethod
    def start(cls, codebook) -> "Accumulator":
        return cls(as_codebook(codebook))


def _cell_sums(points, weights, assignment, m):
    d = points.shape[1]
    num = np.zeros((m, d))
    den = np.zeros(m)
    order = np.argsort(assignment, kind="stable")
    bounds = np.searchsorted(assignment[order], np.arange(m + 1))
    pts = points[order]
    w = weights[order]
    for j in range(m):
        lo, hi = bounds[j], bounds[j + 1]
        if lo == hi:
            continue
        wj = w[lo:hi]
        den[j] = math.fsum(wj.tolist())
        for c in range(d):
            num[j, c] = math.fsum((pts[lo:hi, c] * wj).tolist())
    return num, den


def accumulate_batch(state: Accumulator, batch: SampleBatch | None, threads: int = 1) -> Accumulator:
    """Fold one chunk of samples into ``state`` (mutated and returned).

    ``None`` or a zero-row chunk leaves the state unchanged.
    """
    if batch is None or len(getattr(batch, "points", ())) == 0:
        return state
    m, d = state.codebook.shape
    if batch.dim != d:
        raise ValueError(f"chunk dimension {batch.dim} does not match codebook dimension {d}")
    assignment = assign_cells(batch.points, state.codebook, threads=threads)
    num, den = _cell_sums(batch.points, batch.weights, assignment, m)
    state.numerators.append(num)
    state.denominators.append(den)
    state.count += batch.n
    return state


def finalize_accumulation(state: Accumulator) -> CentroidEstimate:
    m, d = state.codebook.shape
    if state.count == 0:
        raise ValueError("no samples accumulated")
    num = np.zeros((m, d))
    den = np.zeros(m)
    for j in range(m):
        den[j] = math.fsum(part[j] for part in state.denominators)
        for c in range(d):
            num[j, c] = math.fsum(part[j, c] for part in state.numerators)
    return _estimate(num, den, state.count)


def _estimate(num, den, n) -> CentroidEstimate:
    empty = den <= 0
    centroids = np.full_like(num, np.nan)
    centroids[~empty] = num[~empty] / den[~empty, None]
    return CentroidEstimate(centroids, den / n, empty)


def is_centroids(batch: SampleBatch, codebook, threads: int = 1) -> CentroidEstimate:
    """IS-weighted centroid of every Voronoi cell of ``codebook``.

    Empty cells (zero total weight) get NaN centroids and ``empty=True``.
    """
    state = accumulate_batch(Accumulator.start(as_codebook(codebook, batch.dim)), batch, threads)
    return finalize_accumulation(state)


def _from_assignment(batch: SampleBatch, assignment, m) -> CentroidEstimate:
    num, den = _cell_sums(batch.points, batch.weights, assignment, m)
    return _estimate(num, den, batch.n)


def _check_feasible(batch: SampleBatch, m: int) -> None:
    positive = batch.weights > 0
    if not np.any(positive):
        raise DegenerateInputError("all weights are zero")
    distinct = len(np.unique(batch.points[positive], axis=0))
    if m > distinct:
        raise DegenerateInputError(
            f"{m} cells requested but only {distinct} distinct points carry positive weight"
        )


def _recover_empty(batch: SampleBatch, codebook: np.ndarray, empty: np.ndarray) -> np.ndarray:
    """Move each empty cell onto the point contributing most to the distortion."""
    cb = codebook.copy()
    alive = ~empty
    contrib = batch.weights * _min_sq_dists(batch.points, cb[alive])
    for j in np.flatnonzero(empty):
        k = int(np.argmax(contrib))
        cb[j] = batch.points[k]
        contrib = np.minimum(contrib, batch.weights * _min_sq_dists(batch.points, cb[j:j + 1]))
    return cb


def kmeanspp_init(batch: SampleBatch, m: int, rng: np.random.Generator) -> np.ndarray:
    """Weighted k-means++: first pick with probability ~ w, then ~ w * D^2."""
    w = batch.weights
    chosen = [int(rng.choice(batch.n, p=w / w.sum()))]
    d2 = _min_sq_dists(batch.points, batch.points[chosen])
    for _ in range(1, m):
        score = w * d2
        total = score.sum()
        if total <= 0:
            raise DegenerateInputError("not enough distinct positively weighted points to seed")
        k = int(rng.choice(batch.n, p=score / total))
        chosen.append(k)
        d2 = np.minimum(d2, _min_sq_dists(batch.points, batch.points[k:k + 1]))
    return batch.points[chosen].copy()


def lloyd_once(batch: SampleBatch, init, max_iter: int = 100, tol: float = 1e-8,
               threads: int = 1) -> QuantizationResult:
    """Run Lloyd iterations from ``init`` until prototypes move at most ``tol``.

    The returned codebook keeps the order of ``init``.
    """
    cb = as_codebook(init, batch.dim).copy()
    m = len(cb)
    _check_feasible(batch, m)

    assignment, d2 = nearest(batch.points, cb, threads)
    history = [_distortion(batch, d2)]
    recovered: list[bool] = []
    converged = False
    it = 0
    while it < max_iter:
        it += 1
        est = _from_assignment(batch, assignment, m)
        new = est.centroids
        fired = bool(np.any(est.empty))
        if fired:
            new = _recover_empty(batch, np.where(est.empty[:, None], cb, new), est.empty)
        move = float(np.max(np.sqrt(np.sum((new - cb) ** 2, axis=1))))
        cb = new
        assignment, d2 = nearest(batch.points, cb, threads)
        history.append(_distortion(batch, d2))
        recovered.append(fired)
        if move <= tol and not fired:
            converged = True
            break

    masses = _from_assignment(batch, assignment, m).masses
    return QuantizationResult(
        codebook=cb,
        masses=masses,
        distortion=history[-1],
        iterations=[it],
        assignment=assignment,
        converged=converged,
        history=history,
        recovered=recovered,
        start_distortions=[history[-1]],
    )


def canonical_order(batch: SampleBatch) -> np.ndarray:
    """Row order that sorts the batch by (points..., weight)."""
    keys = [batch.weights] + [batch.points[:, c] for c in range(batch.dim - 1, -1, -1)]
    return np.lexsort(keys)


def _sorted_result(res: QuantizationResult) -> QuantizationResult:
    order = sort_order(res.codebook)
    relabel = np.empty_like(order)
    relabel[order] = np.arange(len(order))
    res.codebook = res.codebook[order]
    res.masses = res.masses[order]
    res.assignment = relabel[res.assignment]
    return res


def find_prototypes(batch: SampleBatch, cfg: LloydConfig) -> QuantizationResult:
    """Multistart weighted Lloyd; keeps the start with the lowest distortion.

    Rows are put in a canonical order before seeding, so shuffling the batch
    does not change the result. Cells come back sorted by increasing first
    coordinate of their prototype; ``assignment`` follows the input row order.
    """
    _check_feasible(batch, cfg.nb_cells)
    order = canonical_order(batch)
    canon = batch[order]
    rng = np.random.default_rng(cfg.seed)

    best = None
    iterations = []
    distortions = []
    for _ in range(cfg.multistart):
        init = kmeanspp_init(canon, cfg.nb_cells, rng)
        res = lloyd_once(canon, init, cfg.max_iter, cfg.tol, cfg.threads)
        iterations.append(res.iterations[0])
        distortions.append(res.distortion)
        if best is None or res.distortion < best.distortion:
            best = res

    assignment = np.empty_like(best.assignment)
    assignment[order] = best.assignment
    best.assignment = assignment
    best.iterations = iterations
    best.start_distortions = distortions
    return _sorted_result(best)
