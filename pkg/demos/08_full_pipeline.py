"""
End-to-end pipeline through the CLI
===================================

Stage the 2,000-clip fixture corpus, then drive every stage the way a
shell user would: ingest -> cluster -> curate -> sample -> split ->
stats. Each stage writes its artifact plus a run manifest fingerprinting
inputs and outputs.
"""

import subprocess
import sys
import tempfile
from pathlib import Path

from surgcurate.synthetic import write_fixture_corpus

root = Path(tempfile.mkdtemp(prefix="surgcurate-demo-"))
paths = write_fixture_corpus(root, raw_blobs=True)
print(f"fixture corpus staged in {root}")


def run(*args):
    cmd = [sys.executable, "-m", "surgcurate.cli", *args]
    print("\n$ surgcurate", " ".join(args))
    out = subprocess.run(cmd, capture_output=True, text=True, check=True)
    print(out.stdout.strip())


run("ingest", "--blobs", str(paths["raw_blobs"]), "--ids", str(paths["raw_ids"]),
    "--out", str(root / "store.semb"), "--dim", "64")
run("cluster", "--store", str(root / "store.semb"), "--out", str(root / "tree.sctree"),
    "--levels", "16,4", "--seed", "11")
run("curate", "--store", str(root / "store.semb"), "--tree", str(root / "tree.sctree"),
    "--out", str(root / "curated.jsonl"), "--fraction", "0.10")
run("sample", "--unlabeled", str(root / "curated.jsonl"), "--clinical", str(paths["clinical_ids"]),
    "--out", str(root / "batches.jsonl"), "--batch", "32", "--n", "100", "--seed", "11")
run("split", "--dataset", "web-edu", "--corpus", str(paths["corpus"]),
    "--seed", "11", "--out", str(root / "split.json"))
run("split", "verify", "--manifest", str(root / "split.json"), "--corpus", str(paths["corpus"]))
run("stats", "--corpus", str(paths["corpus"]), "--scale-comparison",
    "--out", str(root / "stats.md"))

print("\nartifacts:")
for p in sorted(root.iterdir()):
    print(f"  {p.name}")
