"""
Mixed clinical/unlabeled batches
================================

15% of batches come purely from the clinical core; the rest mix 70/30
unlabeled/clinical. The effective clinical share of the stream has the
closed form p + (1 - p)(1 - m) = 0.405, and the sampled stream converges
to it.
"""

from surgcurate import MixPolicy, expected_clinical_fraction, sample_stream
from surgcurate.mixer import BatchMode, mixed_batch_counts

policy = MixPolicy(batch_size=64, seed=7)
print("policy:", policy.to_json())
print("exact effective clinical fraction:", expected_clinical_fraction(policy))
print("mixed batch composition (unlabeled, clinical):", mixed_batch_counts(policy))

unlabeled = [f"u{i:04d}" for i in range(500)]
clinical = [f"k{i:04d}" for i in range(200)]

n_batches = 20_000
clinical_slots = total = pure = 0
for spec, ids in sample_stream(unlabeled, clinical, policy, n_batches):
    clinical_slots += spec.n_clinical
    total += len(ids)
    pure += spec.mode is BatchMode.PURE_CLINICAL

print(f"over {n_batches} batches: empirical clinical fraction {clinical_slots / total:.4f}")
print(f"pure clinical batches: {pure} (expected ~{int(n_batches * 0.15)})")
