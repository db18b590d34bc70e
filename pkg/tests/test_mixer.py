import json
from fractions import Fraction

import pytest

from surgcurate.mixer import (
    BatchMode,
    BatchSpec,
    EmptyPool,
    MixPolicy,
    PoolCursor,
    expected_clinical_fraction,
    mixed_batch_counts,
    plan_batch,
    sample_stream,
    write_batch_manifest,
)


class TestExpectedFraction:
    def test_default_policy_is_exactly_405_permille(self):
        policy = MixPolicy()
        assert expected_clinical_fraction(policy) == Fraction(81, 200)
        assert float(expected_clinical_fraction(policy)) == 0.405

    def test_pure_only(self):
        assert expected_clinical_fraction(MixPolicy(p_pure_clinical=1)) == 1

    def test_fully_unlabeled(self):
        policy = MixPolicy(p_pure_clinical=0, mixed_unlabeled_frac=1)
        assert expected_clinical_fraction(policy) == 0

    def test_policy_accepts_decimal_strings(self):
        policy = MixPolicy(p_pure_clinical="0.15", mixed_unlabeled_frac="0.70")
        assert policy.p_pure_clinical == Fraction(3, 20)
        assert policy.mixed_unlabeled_frac == Fraction(7, 10)


class TestPlanBatch:
    def test_mixed_counts_batch_64(self):
        assert mixed_batch_counts(MixPolicy(batch_size=64)) == (45, 19)

    def test_mixed_counts_batch_10(self):
        assert mixed_batch_counts(MixPolicy(batch_size=10)) == (7, 3)

    def test_always_pure_when_p_is_one(self, rng):
        policy = MixPolicy(p_pure_clinical=1, batch_size=16)
        for _ in range(20):
            spec = plan_batch(policy, rng)
            assert spec.mode is BatchMode.PURE_CLINICAL
            assert (spec.n_unlabeled, spec.n_clinical) == (0, 16)

    def test_never_pure_when_p_is_zero(self, rng):
        policy = MixPolicy(p_pure_clinical=0, batch_size=64)
        for _ in range(20):
            spec = plan_batch(policy, rng)
            assert spec.mode is BatchMode.MIXED
            assert (spec.n_unlabeled, spec.n_clinical) == (45, 19)

    def test_batchspec_invariant(self):
        with pytest.raises(ValueError):
            BatchSpec(BatchMode.PURE_CLINICAL, 1, 2)


class TestPoolCursor:
    def test_epoch_is_a_permutation(self):
        ids = [f"c{i}" for i in range(7)]
        cursor = PoolCursor("p", ids, seed=1)
        drawn = cursor.take(7)
        assert sorted(drawn.tolist()) == sorted(ids)
        assert cursor.epoch == 1

    def test_cross_epoch_take(self):
        ids = [f"c{i}" for i in range(5)]
        cursor = PoolCursor("p", ids, seed=1)
        drawn = cursor.take(12)
        assert len(drawn) == 12
        assert sorted(drawn[:5].tolist()) == sorted(ids)
        assert sorted(drawn[5:10].tolist()) == sorted(ids)

    def test_empty_pool(self):
        with pytest.raises(EmptyPool):
            PoolCursor("p", [], seed=0)

    def test_input_order_does_not_matter(self):
        a = PoolCursor("p", ["b", "a", "c"], seed=3).take(3)
        b = PoolCursor("p", ["c", "b", "a"], seed=3).take(3)
        assert a.tolist() == b.tolist()


class TestSampleStream:
    def _pools(self, n_unlabeled=30, n_clinical=9):
        return (
            [f"u{i:03d}" for i in range(n_unlabeled)],
            [f"k{i:03d}" for i in range(n_clinical)],
        )

    def test_deterministic_for_fixed_seed(self):
        unlabeled, clinical = self._pools()
        policy = MixPolicy(batch_size=8, seed=77)
        a = list(sample_stream(unlabeled, clinical, policy, 40))
        b = list(sample_stream(unlabeled, clinical, policy, 40))
        assert a == b
        c = list(sample_stream(unlabeled, clinical, MixPolicy(batch_size=8, seed=78), 40))
        assert a != c

    def test_within_epoch_no_repeats_per_pool(self):
        unlabeled, clinical = self._pools(20, 7)
        policy = MixPolicy(batch_size=6, seed=5)
        useq, cseq = [], []
        for spec, ids in sample_stream(unlabeled, clinical, policy, 60):
            useq.extend(ids[: spec.n_unlabeled])
            cseq.extend(ids[spec.n_unlabeled :])
        for seq, pool in ((useq, unlabeled), (cseq, clinical)):
            for start in range(0, len(seq) - len(pool) + 1, len(pool)):
                epoch = seq[start : start + len(pool)]
                assert sorted(epoch) == sorted(pool)

    def test_single_clinical_clip_recurs_without_within_epoch_repeat(self):
        policy = MixPolicy(batch_size=4, seed=2)
        batches = list(sample_stream(["u0", "u1", "u2"], ["lonely"], policy, 10))
        clinical_draws = [
            cid for spec, ids in batches for cid in ids[spec.n_unlabeled :]
        ]
        assert set(clinical_draws) == {"lonely"}  # one-element epochs reset each draw

    def test_pure_batch_count_is_binomial(self):
        unlabeled, clinical = self._pools(10, 10)
        policy = MixPolicy(batch_size=2, seed=123)
        n = 20_000
        pure = sum(
            spec.mode is BatchMode.PURE_CLINICAL
            for spec, _ in sample_stream(unlabeled, clinical, policy, n)
        )
        mean, sd = n * 0.15, (n * 0.15 * 0.85) ** 0.5
        assert abs(pure - mean) < 4 * sd

    def test_interleave_schedule_is_exact_and_deterministic(self):
        unlabeled, clinical = self._pools()
        policy = MixPolicy(batch_size=8, seed=9)
        n = 400
        modes = [spec.mode for spec, _ in sample_stream(unlabeled, clinical, policy, n, interleave=True)]
        assert modes.count(BatchMode.PURE_CLINICAL) == int(n * 0.15)
        again = [spec.mode for spec, _ in sample_stream(unlabeled, clinical, policy, n, interleave=True)]
        assert modes == again

    def test_mixed_batches_put_unlabeled_first(self):
        unlabeled, clinical = self._pools()
        policy = MixPolicy(p_pure_clinical=0, batch_size=10, seed=4)
        for spec, ids in sample_stream(unlabeled, clinical, policy, 5):
            assert all(cid.startswith("u") for cid in ids[:7])
            assert all(cid.startswith("k") for cid in ids[7:])


class TestBatchManifest:
    def test_manifest_contents_and_determinism(self, tmp_path):
        unlabeled = [f"u{i}" for i in range(12)]
        clinical = [f"k{i}" for i in range(5)]
        policy = MixPolicy(batch_size=4, seed=11)
        p1 = write_batch_manifest(tmp_path / "a.jsonl", unlabeled, clinical, policy, 25)
        p2 = write_batch_manifest(tmp_path / "b.jsonl", unlabeled, clinical, policy, 25)
        assert p1.read_bytes() == p2.read_bytes()
        lines = p1.read_text("utf-8").splitlines()
        header = json.loads(lines[0])
        assert header["kind"] == "header"
        assert header["policy"]["p_pure_clinical"] == "3/20"
        assert header["expected_clinical_fraction"] == "81/200"
        assert len(lines) == 26
        batch = json.loads(lines[1])
        assert set(batch) == {"index", "mode", "clip_ids"}
        assert len(batch["clip_ids"]) == 4
