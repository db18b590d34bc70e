"""
Corpus accounting
=================

Build a video inventory, validate it, and print the per-source /
per-domain stats table plus the scale-comparison report.
"""

from surgcurate import corpus_stats, inventory_report, validate_corpus
from surgcurate.corpus import scale_comparison_report
from surgcurate.synthetic import paper_scale_inventory

# a deterministic inventory fixture at the published corpus scale:
# 2,790 public clinical videos (39.9M frames) + 7,745 web videos (174.6M)
records = paper_scale_inventory()
print(f"{len(records):,} video records")

report = validate_corpus(records)
print(f"violations: {len(report.violations)}, warnings: {len(report.warnings)}")

stats = corpus_stats(records)
print(f"totals: {stats.total_videos:,} videos / {stats.total_frames:,} frames\n")

print(inventory_report(stats))
print(scale_comparison_report(stats))
