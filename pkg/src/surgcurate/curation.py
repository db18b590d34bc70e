"""Budget allocation over a cluster tree and nearest-centroid selection.

The default allocation splits the total budget equally among each node's
children, top level first, capping every child at the number of points
reachable under it and water-filling the surplus back into its siblings.
A proportional mode exists behind a flag; it reproduces the raw data
distribution and therefore does not balance anything.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable

import numpy as np

from .apportion import as_fraction, proportional_split, round_half_away_from_zero, waterfill_equal_split
from .clustering import ClusterTree
from .store import EmbeddingMatrix


class CurationError(Exception):
    pass


class FractionOutOfRange(CurationError):
    pass


class QuotaExceedsMembers(CurationError):
    pass


@dataclass
class BudgetPlan:
    """Integer quota for every tree node; level 0 is the selection level."""

    total_budget: int
    fraction: Fraction
    quotas: list[np.ndarray]  # quotas[level][cluster], aligned with tree.levels
    mode: str = "equal"

    def quota(self, level: int, cluster: int) -> int:
        return int(self.quotas[level][cluster])

    def level_total(self, level: int) -> int:
        return int(self.quotas[level].sum())


@dataclass(frozen=True)
class SelectionRecord:
    clip_id: str
    leaf: int
    rank: int
    distance: float


@dataclass
class CuratedSet:
    """The curated subset: exactly total_budget clips, sorted by clip id."""

    selected: list[str]
    provenance: dict[str, SelectionRecord]
    plan: BudgetPlan
    tree_fingerprint: str

    def __len__(self) -> int:
        return len(self.selected)

    def to_jsonl(self, path: str | Path) -> Path:
        path = Path(path)
        header = {
            "kind": "header",
            "total_budget": self.plan.total_budget,
            "fraction": str(self.plan.fraction),
            "mode": self.plan.mode,
            "tree_fingerprint": self.tree_fingerprint,
        }
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(json.dumps(header, sort_keys=True) + "\n")
            for cid in self.selected:
                rec = self.provenance[cid]
                fh.write(
                    json.dumps(
                        {"clip_id": rec.clip_id, "leaf": rec.leaf, "rank": rec.rank, "distance": rec.distance},
                        sort_keys=True,
                    )
                    + "\n"
                )
        return path

    @classmethod
    def read_ids(cls, path: str | Path) -> list[str]:
        ids = []
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                doc = json.loads(line)
                if doc.get("kind") == "header":
                    continue
                ids.append(doc["clip_id"])
        return ids


def allocate_budget(tree: ClusterTree, fraction, mode: str = "equal") -> BudgetPlan:
    """Integer quotas for every node such that each level sums exactly to
    round(fraction * n_points) and no node exceeds its reachable points."""
    frac = as_fraction(fraction)
    if not 0 < frac <= 1:
        raise FractionOutOfRange(f"fraction must be in (0, 1], got {frac}")
    if mode not in ("equal", "proportional"):
        raise ValueError(f"unknown allocation mode {mode!r}")

    n_levels = len(tree.levels)
    total_budget = round_half_away_from_zero(frac * tree.n_points)
    reachable = [tree.reachable_counts(lvl) for lvl in range(n_levels)]

    def split(budget: int, caps: list[int]) -> list[int]:
        if mode == "equal":
            return waterfill_equal_split(budget, caps)
        return proportional_split(budget, caps)

    quotas: list[np.ndarray | None] = [None] * n_levels
    top = n_levels - 1
    quotas[top] = np.asarray(split(total_budget, [int(c) for c in reachable[top]]), dtype=np.int64)
    for level in range(top, 0, -1):
        child_quotas = np.zeros(tree.level_sizes[level - 1], dtype=np.int64)
        groups = tree.children(level)
        for parent, children in enumerate(groups):
            caps = [int(reachable[level - 1][c]) for c in children]
            alloc = split(int(quotas[level][parent]), caps)
            child_quotas[children] = alloc
        quotas[level - 1] = child_quotas
    return BudgetPlan(total_budget=total_budget, fraction=frac, quotas=quotas, mode=mode)


def select_nearest(points: EmbeddingMatrix, leaf_centroid, member_ids: Iterable[str], quota: int) -> list[str]:
    """The quota members closest (squared Euclidean) to the leaf centroid.

    Ties go to the lexicographically smaller clip id; the result is sorted
    by (distance, clip_id).
    """
    member_ids = list(member_ids)
    if quota > len(member_ids):
        raise QuotaExceedsMembers(f"quota {quota} > {len(member_ids)} members")
    if quota < 0:
        raise ValueError("quota must be non-negative")
    if quota == 0:
        return []
    index = points.row_index()
    rows = np.asarray([index[cid] for cid in member_ids], dtype=np.int64)
    ids = np.asarray(member_ids)
    c = np.asarray(leaf_centroid, dtype=np.float64)
    diff = points.data[rows].astype(np.float64) - c[None, :]
    dists = np.einsum("ij,ij->i", diff, diff)
    order = np.lexsort((ids, dists))  # distance first, then clip id
    return [str(ids[i]) for i in order[:quota]]


def _select_leaf(points: EmbeddingMatrix, centroid, member_rows: np.ndarray, quota: int) -> list[str]:
    # same ordering rule as select_nearest, but indexed by row to stay
    # linear in the leaf size instead of rebuilding the full id index
    if quota == 0:
        return []
    ids = np.asarray([points.row_ids[r] for r in member_rows])
    c = np.asarray(centroid, dtype=np.float64)
    diff = points.data[member_rows].astype(np.float64) - c[None, :]
    dists = np.einsum("ij,ij->i", diff, diff)
    order = np.lexsort((ids, dists))
    return [str(ids[i]) for i in order[:quota]]


def curate(
    tree: ClusterTree,
    points: EmbeddingMatrix,
    fraction=Fraction(1, 10),
    mode: str = "equal",
    workers: int | None = None,
) -> CuratedSet:
    """Allocate the budget, then take the nearest members of every leaf.

    `points` must be in the same representation the tree was built over
    (normalize first when the tree's normalized flag is set). Leaf
    selections are independent; they may run on a worker pool and are
    merged in leaf-index order, so the result does not depend on the pool.
    """
    if tree.n_points != points.n_rows:
        raise CurationError(
            f"tree was built over {tree.n_points} points, store has {points.n_rows}"
        )
    plan = allocate_budget(tree, fraction, mode=mode)
    members = tree.leaf_members()
    leaf_model = tree.levels[0]

    def job(leaf: int) -> list[str]:
        return _select_leaf(points, leaf_model.centroids[leaf], members[leaf], plan.quota(0, leaf))

    leaves = range(tree.level_sizes[0])
    if workers is None or workers <= 1:
        per_leaf = [job(leaf) for leaf in leaves]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_leaf = list(pool.map(job, leaves))

    row_index = points.row_index()
    provenance: dict[str, SelectionRecord] = {}
    for leaf, picked in enumerate(per_leaf):
        centroid = leaf_model.centroids[leaf].astype(np.float64)
        for rank, cid in enumerate(picked):
            diff = points.data[row_index[cid]].astype(np.float64) - centroid
            provenance[cid] = SelectionRecord(cid, leaf, rank, float(diff @ diff))
    selected = sorted(provenance)
    if len(selected) != plan.total_budget:
        raise CurationError(
            f"selected {len(selected)} clips for a budget of {plan.total_budget}"
        )
    return CuratedSet(
        selected=selected,
        provenance=provenance,
        plan=plan,
        tree_fingerprint=tree.fingerprint(),
    )
