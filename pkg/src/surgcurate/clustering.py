"""Deterministic K-means and the multi-level centroid hierarchy.

Design constraints that shape this module:

* squared Euclidean distances on f32 rows with all accumulation in f64;
* nearest-centroid ties go to the lowest cluster index;
* empty clusters are repaired by stealing the point farthest from its
  centroid out of the largest cluster;
* points are processed in fixed-size chunks and per-chunk partial sums
  are combined in chunk order, so results are bit-identical for a fixed
  chunk size no matter how many worker threads run the chunks;
* K-means++ seeding walks points in sorted row-id order when row ids are
  available, so ingest order cannot change which points seed the run.
"""

from __future__ import annotations

import hashlib
import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .seeding import derive_seed
from .store import EmbeddingMatrix

DEFAULT_TOL = 1e-4
DEFAULT_MAX_ITER = 100
DEFAULT_CHUNK_SIZE = 4096

TREE_MAGIC = b"SURGTRE1"


class ClusteringError(Exception):
    pass


class KTooLarge(ClusteringError):
    pass


class DimensionMismatch(ClusteringError):
    pass


class BadTreeFile(ClusteringError):
    pass


def _as_points(points) -> tuple[np.ndarray, list[str] | None]:
    if isinstance(points, EmbeddingMatrix):
        return points.data, points.row_ids
    arr = np.ascontiguousarray(points, dtype=np.float32)
    if arr.ndim != 2:
        raise DimensionMismatch(f"points must be 2-D, got shape {arr.shape}")
    return arr, None


@dataclass
class ClusterModel:
    """One K-means solution; immutable once returned."""

    k: int
    centroids: np.ndarray  # (k, dim) f32
    assignments: np.ndarray  # (n,) u32, point -> cluster index
    inertia: float  # sum of squared distances to assigned centroids
    iterations_run: int
    seed: int
    inertia_history: list[float] = field(default_factory=list)

    def counts(self) -> np.ndarray:
        return np.bincount(self.assignments, minlength=self.k)


def _pairwise_sq_dists(xb64: np.ndarray, centroids64: np.ndarray, c2: np.ndarray) -> np.ndarray:
    """Expansion-form squared distances, clamped at zero (f64 throughout)."""
    x2 = np.einsum("ij,ij->i", xb64, xb64)
    d = x2[:, None] + c2[None, :] - 2.0 * (xb64 @ centroids64.T)
    np.maximum(d, 0.0, out=d)
    return d


def _assign_chunk(x_chunk: np.ndarray, centroids64: np.ndarray, c2: np.ndarray):
    """Assignment plus partial statistics for one chunk (runs on a worker)."""
    xb = x_chunk.astype(np.float64)
    x2 = np.einsum("ij,ij->i", xb, xb)
    d = x2[:, None] + c2[None, :] - 2.0 * (xb @ centroids64.T)
    np.maximum(d, 0.0, out=d)
    assign = np.argmin(d, axis=1)  # ties -> lowest index
    mind = d[np.arange(len(assign)), assign]
    # the expansion form cannot resolve distances below ~eps * (|x|^2 + |c|^2);
    # snap that noise to exact zero so fixed points report inertia 0
    mind[mind <= 1e-12 * (x2 + c2[assign])] = 0.0
    inertia = float(np.sum(mind))
    order = np.argsort(assign, kind="stable")
    uniq, starts = np.unique(assign[order], return_index=True)
    sums = np.add.reduceat(xb[order], starts, axis=0)
    counts = np.diff(np.concatenate([starts, [len(assign)]]))
    return assign.astype(np.uint32), mind, uniq, sums, counts, inertia


def _chunks(n: int, chunk_size: int) -> list[tuple[int, int]]:
    return [(s, min(s + chunk_size, n)) for s in range(0, n, chunk_size)]


def _assignment_pass(
    points: np.ndarray,
    centroids64: np.ndarray,
    chunk_size: int,
    workers: int | None,
):
    """One full assignment over all points.

    Returns assignments, per-point min distances, per-cluster f64 sums and
    counts, and the total inertia. Partial results are merged in chunk
    order, never in completion order.
    """
    n = len(points)
    k = len(centroids64)
    c2 = np.einsum("ij,ij->i", centroids64, centroids64)
    spans = _chunks(n, chunk_size)

    if workers is None or workers <= 1 or len(spans) <= 1:
        results = [_assign_chunk(points[s:e], centroids64, c2) for s, e in spans]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda se: _assign_chunk(points[se[0]:se[1]], centroids64, c2), spans))

    assign = np.empty(n, dtype=np.uint32)
    mind = np.empty(n, dtype=np.float64)
    sums = np.zeros((k, points.shape[1]), dtype=np.float64)
    counts = np.zeros(k, dtype=np.int64)
    partial_inertias = []
    for (s, e), (a, m, uniq, ps, pc, pi) in zip(spans, results):
        assign[s:e] = a
        mind[s:e] = m
        sums[uniq] += ps
        counts[uniq] += pc
        partial_inertias.append(pi)
    return assign, mind, sums, counts, math.fsum(partial_inertias)


def _repair_empty(
    points: np.ndarray,
    assign: np.ndarray,
    mind: np.ndarray,
    sums: np.ndarray,
    counts: np.ndarray,
) -> None:
    """Give every empty cluster one point, stolen from the largest cluster.

    The stolen point is the member farthest from its assigned centroid
    (ties -> lowest row index). Mutates all four arrays in place.
    """
    for e in np.flatnonzero(counts == 0):
        donor = int(np.argmax(counts))
        if counts[donor] < 2:  # cannot happen while n >= k, kept as a guard
            break
        members = np.flatnonzero(assign == donor)
        p = int(members[np.argmax(mind[members])])
        xb = points[p].astype(np.float64)
        assign[p] = e
        sums[donor] -= xb
        counts[donor] -= 1
        sums[e] = xb
        counts[e] = 1
        mind[p] = 0.0


def _mean_update(sums: np.ndarray, counts: np.ndarray, previous: np.ndarray) -> np.ndarray:
    """Cluster means; a cluster left empty (only possible when n < k)
    keeps its previous centroid."""
    out = sums / np.maximum(counts, 1)[:, None]
    empty = counts == 0
    if empty.any():
        out[empty] = previous[empty]
    return out


def lloyd_step(
    points,
    centroids,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
    workers: int | None = None,
):
    """One Lloyd iteration: assign, repair empties, recompute means.

    Returns (assignments, new_centroids, inertia) where inertia is the
    cost of the assignment against the *input* centroids.
    """
    X, _ = _as_points(points)
    C = np.asarray(centroids, dtype=np.float32)
    if C.ndim != 2 or C.shape[1] != X.shape[1]:
        raise DimensionMismatch(f"centroids {C.shape} do not match points {X.shape}")
    C64 = C.astype(np.float64)
    assign, mind, sums, counts, inertia = _assignment_pass(X, C64, chunk_size, workers)
    _repair_empty(X, assign, mind, sums, counts)
    new_centroids = _mean_update(sums, counts, C64).astype(np.float32)
    return assign, new_centroids, inertia


def _min_update_sq_dists(Xc: np.ndarray, centroid64: np.ndarray, d2: np.ndarray, chunk: int = 65536) -> None:
    """d2 <- min(d2, squared distance to centroid), f64 math per chunk."""
    c = centroid64[None, :]
    c2 = np.einsum("ij,ij->i", c, c)
    for s in range(0, len(Xc), chunk):
        xb = Xc[s : s + chunk].astype(np.float64)
        dn = _pairwise_sq_dists(xb, c, c2)[:, 0]
        np.minimum(d2[s : s + chunk], dn, out=d2[s : s + chunk])


def kmeanspp_init(points, k: int, seed: int, row_ids: list[str] | None = None) -> np.ndarray:
    """K-means++ (D^2-weighted) seeding over a canonical point order.

    When row ids are given, candidates are walked in sorted-row-id order so
    permuting ingest order picks the same points. Returns (k, dim) f32.
    """
    X, ids = _as_points(points)
    if row_ids is None:
        row_ids = ids
    n = len(X)
    if not 1 <= k <= n:
        raise KTooLarge(f"k={k} with {n} points")
    rng = np.random.default_rng(seed)

    if row_ids is not None:
        if len(row_ids) != n:
            raise DimensionMismatch(f"{len(row_ids)} row ids for {n} points")
        canon = np.argsort(np.asarray(row_ids, dtype=object), kind="stable")
    else:
        canon = np.arange(n)
    Xc = X[canon]

    chosen = np.empty(k, dtype=np.int64)
    chosen[0] = int(rng.integers(0, n))
    d2 = np.full(n, np.inf, dtype=np.float64)
    _min_update_sq_dists(Xc, Xc[chosen[0]].astype(np.float64), d2)
    d2[chosen[0]] = 0.0
    for j in range(1, k):
        total = float(d2.sum())
        if total > 0.0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            candidates = np.setdiff1d(np.arange(n), chosen[:j])
            idx = int(candidates[rng.integers(0, len(candidates))])
        chosen[j] = idx
        _min_update_sq_dists(Xc, Xc[idx].astype(np.float64), d2)
        d2[chosen[: j + 1]] = 0.0
    return Xc[chosen].copy()


def kmeans(
    points,
    k: int,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    seed: int = 0,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
    workers: int | None = None,
    row_ids: list[str] | None = None,
) -> ClusterModel:
    """Lloyd K-means with K-means++ seeding, deterministic for a fixed
    (seed, chunk_size) regardless of worker count.

    Iterates until the relative inertia improvement drops below `tol`,
    the assignment stabilizes exactly, or `max_iter` is hit. The returned
    assignments are re-derived against the final (f32) centroids, so every
    point is assigned to its true nearest centroid (ties -> lowest index).
    """
    X, ids = _as_points(points)
    if row_ids is None:
        row_ids = ids
    n = len(X)
    if not 1 <= k <= n:
        raise KTooLarge(f"k={k} with {n} points")

    centroids64 = kmeanspp_init(X, k, seed, row_ids).astype(np.float64)
    history: list[float] = []
    prev_assign: np.ndarray | None = None
    iterations = 0
    for _ in range(max_iter):
        assign, mind, sums, counts, inertia = _assignment_pass(X, centroids64, chunk_size, workers)
        _repair_empty(X, assign, mind, sums, counts)
        iterations += 1
        if history and inertia > history[-1]:
            # float wobble at convergence; the exact sequence cannot increase
            break
        history.append(inertia)
        centroids64 = _mean_update(sums, counts, centroids64)
        if prev_assign is not None and np.array_equal(assign, prev_assign):
            break
        if len(history) >= 2:
            prev, cur = history[-2], history[-1]
            if prev <= 0.0 or (prev - cur) < tol * prev:
                break
        prev_assign = assign

    centroids = centroids64.astype(np.float32)
    # final alignment: assignments and inertia against the stored centroids
    for _ in range(k):
        assign, mind, sums, counts, inertia = _assignment_pass(
            X, centroids.astype(np.float64), chunk_size, workers
        )
        if (counts != 0).all():
            break
        _repair_empty(X, assign, mind, sums, counts)
        centroids = _mean_update(sums, counts, centroids.astype(np.float64)).astype(np.float32)
    return ClusterModel(
        k=k,
        centroids=centroids,
        assignments=assign,
        inertia=inertia,
        iterations_run=iterations,
        seed=seed,
        inertia_history=history,
    )


@dataclass
class ClusterTree:
    """Multi-level hierarchy: level 0 clusters the points, level l > 0
    clusters the centroids of level l - 1."""

    levels: list[ClusterModel]
    level_sizes: list[int]
    seed: int
    tol: float
    normalized: bool

    @property
    def n_points(self) -> int:
        return len(self.levels[0].assignments)

    def compose_assignments(self) -> np.ndarray:
        """Map every original point to its top-level cluster."""
        assign = self.levels[0].assignments.astype(np.int64)
        for model in self.levels[1:]:
            assign = model.assignments.astype(np.int64)[assign]
        return assign

    def leaf_members(self) -> list[np.ndarray]:
        """Row indices of level-0 cluster members, index-ordered."""
        assign = self.levels[0].assignments
        order = np.argsort(assign, kind="stable")
        sorted_assign = assign[order]
        boundaries = np.searchsorted(sorted_assign, np.arange(self.level_sizes[0] + 1))
        return [order[boundaries[j]: boundaries[j + 1]] for j in range(self.level_sizes[0])]

    def children(self, level: int) -> list[np.ndarray]:
        """For each cluster at `level`, the indices of its child clusters
        one level down (level 0 has points, not child clusters)."""
        if level <= 0:
            raise ValueError("level 0 clusters have points, not child clusters")
        assign = self.levels[level].assignments
        order = np.argsort(assign, kind="stable")
        sorted_assign = assign[order]
        boundaries = np.searchsorted(sorted_assign, np.arange(self.level_sizes[level] + 1))
        return [order[boundaries[j]: boundaries[j + 1]] for j in range(self.level_sizes[level])]

    def reachable_counts(self, level: int) -> np.ndarray:
        """Number of original points reachable under each cluster at `level`."""
        counts = np.bincount(self.levels[0].assignments, minlength=self.level_sizes[0]).astype(np.int64)
        for lvl in range(1, level + 1):
            assign = self.levels[lvl].assignments
            up = np.zeros(self.level_sizes[lvl], dtype=np.int64)
            np.add.at(up, assign, counts)
            counts = up
        return counts

    def to_bytes(self) -> bytes:
        out = bytearray()
        out += TREE_MAGIC
        out += struct.pack("<Q", len(self.levels))
        for size in self.level_sizes:
            out += struct.pack("<Q", size)
        out += struct.pack("<Q", self.seed & 0xFFFFFFFFFFFFFFFF)
        out += struct.pack("<d", self.tol)
        out += struct.pack("<B", 1 if self.normalized else 0)
        for model in self.levels:
            out += struct.pack("<QQ", model.centroids.shape[0], model.centroids.shape[1])
            out += model.centroids.astype("<f4", copy=False).tobytes(order="C")
        for model in self.levels:
            out += struct.pack("<Q", len(model.assignments))
            out += model.assignments.astype("<u4", copy=False).tobytes()
        out += hashlib.sha256(bytes(out)).digest()
        return bytes(out)

    def fingerprint(self) -> str:
        """Hex digest identifying the exact tree contents."""
        return self.to_bytes()[-32:].hex()

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.write_bytes(self.to_bytes())
        return path

    @classmethod
    def from_bytes(cls, blob: bytes) -> "ClusterTree":
        if len(blob) < len(TREE_MAGIC) + 8 + 32:
            raise BadTreeFile("tree file shorter than fixed header")
        if blob[: len(TREE_MAGIC)] != TREE_MAGIC:
            raise BadTreeFile(f"bad magic {blob[:8]!r}")
        body, checksum = blob[:-32], blob[-32:]
        if hashlib.sha256(body).digest() != checksum:
            raise BadTreeFile("tree checksum mismatch")
        off = len(TREE_MAGIC)

        def u64() -> int:
            nonlocal off
            val = struct.unpack_from("<Q", body, off)[0]
            off += 8
            return val

        n_levels = u64()
        sizes = [u64() for _ in range(n_levels)]
        seed = u64()
        tol = struct.unpack_from("<d", body, off)[0]
        off += 8
        normalized = bool(body[off])
        off += 1
        centroid_mats = []
        for _ in range(n_levels):
            rows, dim = u64(), u64()
            mat = np.frombuffer(body, dtype="<f4", count=rows * dim, offset=off).reshape(rows, dim).copy()
            off += rows * dim * 4
            centroid_mats.append(mat)
        assigns = []
        for _ in range(n_levels):
            count = u64()
            arr = np.frombuffer(body, dtype="<u4", count=count, offset=off).copy()
            off += count * 4
            assigns.append(arr)
        if off != len(body):
            raise BadTreeFile(f"{len(body) - off} unexpected trailing bytes")
        levels = [
            ClusterModel(
                k=len(cm),
                centroids=cm,
                assignments=am,
                inertia=float("nan"),
                iterations_run=0,
                seed=seed,
            )
            for cm, am in zip(centroid_mats, assigns)
        ]
        return cls(levels=levels, level_sizes=sizes, seed=seed, tol=tol, normalized=normalized)

    @classmethod
    def load(cls, path: str | Path) -> "ClusterTree":
        return cls.from_bytes(Path(path).read_bytes())


def build_hierarchy(
    points,
    level_sizes: list[int],
    seed: int = 0,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
    workers: int | None = None,
    normalized: bool = False,
) -> ClusterTree:
    """Cluster points at level_sizes[0], then recursively cluster the
    resulting centroids at each coarser size."""
    X, row_ids = _as_points(points)
    if not level_sizes:
        raise ValueError("level_sizes must be non-empty")
    if any(b >= a for a, b in zip(level_sizes, level_sizes[1:])):
        raise ValueError(f"level_sizes must be strictly decreasing, got {level_sizes}")

    levels: list[ClusterModel] = []
    data = X
    ids = row_ids
    for lvl, k in enumerate(level_sizes):
        model = kmeans(
            data,
            k,
            tol=tol,
            max_iter=max_iter,
            seed=derive_seed(seed, f"kmeans-level-{lvl}"),
            chunk_size=chunk_size,
            workers=workers,
            row_ids=ids,
        )
        levels.append(model)
        data = model.centroids
        ids = None  # upper levels cluster centroids; index order is canonical
    return ClusterTree(levels=levels, level_sizes=list(level_sizes), seed=seed, tol=tol, normalized=normalized)
