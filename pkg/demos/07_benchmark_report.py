"""
Benchmark aggregation
=====================

Score a toy evaluation, aggregate domain macros, and render the shipped
reference tables (per-dataset scores, domain macros, deltas, prompt
sensitivity) exactly as the report CLI does.
"""

from surgcurate import Prediction, acc_at_1, emit_report
from surgcurate.apportion import format_points
from surgcurate.metrics import DomainReport, reference_report_tables

# Acc@1 is exact rational arithmetic; rounding happens only at display
preds = [Prediction(f"s{i}", "grasp" if i < 3 else "cut", "grasp") for i in range(7)]
acc = acc_at_1(preds)
print(f"toy evaluation: {acc} -> {format_points(acc)}")

# domain macros from per-dataset scores (membership is explicit config)
report = DomainReport.from_dataset_scores(
    {"cholec80": "29.30", "hyperkvasir": "55.28", "cataract-101": "35.16", "jigsaws": "47.49"}
)
print("domain scores:", {d: format_points(v) for d, v in report.domain_scores.items()})
print("overall macro:", format_points(report.overall), "worst:", report.worst[0], format_points(report.worst[1]))

# the shipped reference tables: markdown with per-row maxima bolded
tables = reference_report_tables()
print()
print(emit_report(tables[1]))  # the domain-macro block
print(emit_report(tables[2]))  # computed delta rows
