"""Seeded mixed-batch stream over an unlabeled pool and a clinical core.

Each batch is either pure clinical (probability p) or a fixed
unlabeled/clinical mixture. The effective clinical share of the stream is
the closed form p + (1 - p) * (1 - m), exact in rational arithmetic: with
the defaults (p = 0.15, m = 0.70) that is 81/200 = 0.405.

Pools are drawn without replacement inside an epoch; exhausting a pool
reshuffles it under an epoch-incremented seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .apportion import as_fraction, largest_remainder
from .seeding import derive_seed


class MixerError(Exception):
    pass


class EmptyPool(MixerError):
    pass


class BatchMode(str, Enum):
    PURE_CLINICAL = "PureClinical"
    MIXED = "Mixed"


@dataclass(frozen=True)
class MixPolicy:
    """Sampling policy; probabilities are exact rationals."""

    p_pure_clinical: Fraction = Fraction(15, 100)
    mixed_unlabeled_frac: Fraction = Fraction(70, 100)
    batch_size: int = 64
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "p_pure_clinical", as_fraction(self.p_pure_clinical))
        object.__setattr__(self, "mixed_unlabeled_frac", as_fraction(self.mixed_unlabeled_frac))
        if not 0 <= self.p_pure_clinical <= 1:
            raise ValueError(f"p_pure_clinical {self.p_pure_clinical} outside [0, 1]")
        if not 0 <= self.mixed_unlabeled_frac <= 1:
            raise ValueError(f"mixed_unlabeled_frac {self.mixed_unlabeled_frac} outside [0, 1]")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")

    def to_json(self) -> dict:
        return {
            "p_pure_clinical": str(self.p_pure_clinical),
            "mixed_unlabeled_frac": str(self.mixed_unlabeled_frac),
            "batch_size": self.batch_size,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class BatchSpec:
    mode: BatchMode
    n_unlabeled: int
    n_clinical: int

    def __post_init__(self) -> None:
        if self.mode is BatchMode.PURE_CLINICAL and self.n_unlabeled != 0:
            raise ValueError("pure clinical batches cannot contain unlabeled clips")


def expected_clinical_fraction(policy: MixPolicy) -> Fraction:
    """Closed-form clinical share of the stream, exact."""
    p = policy.p_pure_clinical
    m = policy.mixed_unlabeled_frac
    return p + (1 - p) * (1 - m)


def mixed_batch_counts(policy: MixPolicy) -> tuple[int, int]:
    """(n_unlabeled, n_clinical) for a mixed batch, largest-remainder
    rounded so long-run composition stays unbiased for any batch size."""
    b = policy.batch_size
    m = policy.mixed_unlabeled_frac
    n_unlabeled, n_clinical = largest_remainder([m * b, (1 - m) * b], b)
    return n_unlabeled, n_clinical


def plan_batch(policy: MixPolicy, rng: np.random.Generator) -> BatchSpec:
    """Draw one batch composition: pure clinical with probability p, else
    the fixed mixed composition."""
    if rng.random() < float(policy.p_pure_clinical):
        return BatchSpec(BatchMode.PURE_CLINICAL, 0, policy.batch_size)
    n_u, n_c = mixed_batch_counts(policy)
    return BatchSpec(BatchMode.MIXED, n_u, n_c)


class PoolCursor:
    """Without-replacement cursor over one pool of clip ids.

    Epoch e is a permutation drawn from seed (pool_seed + e); exhaustion
    rolls into epoch e + 1. No id repeats within an epoch.
    """

    def __init__(self, pool_id: str, ids: Sequence[str], seed: int):
        ids = sorted(ids)
        if not ids:
            raise EmptyPool(f"pool {pool_id!r} is empty")
        if len(set(ids)) != len(ids):
            raise ValueError(f"pool {pool_id!r} has duplicate clip ids")
        self.pool_id = pool_id
        self._ids = np.asarray(ids)
        self._seed = seed
        self.epoch = 0
        self.position = 0
        self._permuted = self._shuffle(0)

    def _shuffle(self, epoch: int) -> np.ndarray:
        rng = np.random.default_rng((self._seed + epoch) & 0xFFFFFFFFFFFFFFFF)
        return self._ids[rng.permutation(len(self._ids))]

    def take(self, count: int) -> np.ndarray:
        out = []
        remaining = count
        while remaining > 0:
            available = len(self._permuted) - self.position
            grab = min(available, remaining)
            out.append(self._permuted[self.position : self.position + grab])
            self.position += grab
            remaining -= grab
            if self.position == len(self._permuted):
                self.epoch += 1
                self._permuted = self._shuffle(self.epoch)
                self.position = 0
        return out[0] if len(out) == 1 else np.concatenate(out)


def _pure_schedule(index: int, p: Fraction) -> bool:
    # Bresenham-style spread: pure batches land where floor((i+1)p) advances
    return (index + 1) * p.numerator // p.denominator > index * p.numerator // p.denominator


def sample_stream(
    unlabeled_pool: Iterable[str],
    clinical_pool: Iterable[str],
    policy: MixPolicy,
    n_batches: int,
    interleave: bool = False,
) -> Iterator[tuple[BatchSpec, list[str]]]:
    """Yield (spec, clip_ids) batches; unlabeled ids precede clinical ids
    within a mixed batch.

    `interleave=True` replaces the i.i.d. pure/mixed coin with a
    variance-free deterministic schedule at the same rate.
    """
    unlabeled = PoolCursor("unlabeled", list(unlabeled_pool), derive_seed(policy.seed, "pool-unlabeled"))
    clinical = PoolCursor("clinical", list(clinical_pool), derive_seed(policy.seed, "pool-clinical"))
    mode_rng = np.random.default_rng(derive_seed(policy.seed, "batch-mode"))

    for index in range(n_batches):
        if interleave:
            if _pure_schedule(index, policy.p_pure_clinical):
                spec = BatchSpec(BatchMode.PURE_CLINICAL, 0, policy.batch_size)
            else:
                n_u, n_c = mixed_batch_counts(policy)
                spec = BatchSpec(BatchMode.MIXED, n_u, n_c)
        else:
            spec = plan_batch(policy, mode_rng)
        if spec.mode is BatchMode.PURE_CLINICAL:
            ids = clinical.take(spec.n_clinical)
        else:
            parts = []
            if spec.n_unlabeled:
                parts.append(unlabeled.take(spec.n_unlabeled))
            if spec.n_clinical:
                parts.append(clinical.take(spec.n_clinical))
            ids = parts[0] if len(parts) == 1 else np.concatenate(parts)
        yield spec, ids.tolist()


def write_batch_manifest(
    path: str | Path,
    unlabeled_pool: Iterable[str],
    clinical_pool: Iterable[str],
    policy: MixPolicy,
    n_batches: int,
    interleave: bool = False,
) -> Path:
    """Materialize a stream as JSON-lines: a header with the policy and
    seed, then one line per batch."""
    path = Path(path)
    header = {
        "kind": "header",
        "policy": policy.to_json(),
        "n_batches": n_batches,
        "interleave": interleave,
        "expected_clinical_fraction": str(expected_clinical_fraction(policy)),
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        stream = sample_stream(unlabeled_pool, clinical_pool, policy, n_batches, interleave=interleave)
        for index, (spec, clip_ids) in enumerate(stream):
            fh.write(
                json.dumps(
                    {"index": index, "mode": spec.mode.value, "clip_ids": clip_ids},
                    sort_keys=True,
                )
                + "\n"
            )
    return path
