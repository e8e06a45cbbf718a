"""Drive the command-line surface end to end on a generated dataset:
preprocess, train, evaluate, export attention, and benchmark latency.

Run:  python3 demos/06_cli_walkthrough.py
"""

import csv
import json
import tempfile
from pathlib import Path

import numpy as np

from papernet.cli import main

workdir = Path(tempfile.mkdtemp(prefix="papernet_demo_"))
data_path = workdir / "synthetic.csv"

rng = np.random.default_rng(11)
means = rng.normal(0.0, 1.0, size=(4, 16))
labels = rng.permutation(np.arange(800) % 4)
features = means[labels] + rng.normal(0.0, 0.5, size=(800, 16))
with open(data_path, "w", newline="") as fh:
    writer = csv.writer(fh)
    writer.writerow([f"X{i+1}" for i in range(16)] + ["y"])
    for row, label in zip(features, labels):
        writer.writerow([repr(float(v)) for v in row] + [int(label)])
print(f"dataset: {data_path} (800 rows)")

run_dir = workdir / "run"
base = ["--data", str(data_path), "--outdir", str(run_dir), "--seed", "0"]

print("\n$ papernet preprocess ...")
assert main(["preprocess", *base]) == 0

print("\n$ papernet train --max-epochs 6 ...")
assert main(["train", *base, "--max-epochs", "6"]) == 0
print("artifacts:", sorted(p.name for p in run_dir.iterdir()))

report = json.loads((run_dir / "report.json").read_text())
print(f"report.json: accuracy {report['accuracy']:.3f}, "
      f"macro-F1 {report['macro_f1']:.3f}")

print("\n$ papernet evaluate --split val ...")
eval_dir = workdir / "eval"
assert main([
    "evaluate", "--data", str(data_path), "--outdir", str(eval_dir),
    "--seed", "0", "--weights", str(run_dir / "weights_best"), "--split", "val",
]) == 0

print("\n$ papernet export-attention ...")
attn_dir = workdir / "attn"
assert main([
    "export-attention", "--data", str(data_path), "--outdir", str(attn_dir),
    "--seed", "0", "--weights", str(run_dir / "weights_best"),
]) == 0

print("\n$ papernet bench ...")
assert main(["bench", "--weights", str(run_dir / "weights_best"),
             "--n-samples", "100"]) == 0

print(f"\nall outputs under {workdir}")
