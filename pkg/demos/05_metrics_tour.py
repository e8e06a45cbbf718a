"""The evaluation stack on a worked example: confusion matrix, per-class
and macro P/R/F1, one-vs-rest ROC/AUC, and McNemar's test.

Run:  python3 demos/05_metrics_tour.py
"""

import numpy as np

from papernet.metrics import (
    confusion,
    mcnemar,
    prf_metrics,
    random_baseline,
    roc_auc,
)

y_true = np.array([0, 0, 1, 1, 2, 2])
y_pred = np.array([0, 1, 1, 1, 2, 0])

cm = confusion(y_true, y_pred, 3)
print("confusion matrix (rows = truth):")
print(cm)

m = prf_metrics(cm)
print("\nclass  precision  recall      F1")
for k, c in enumerate(m.per_class):
    print(f"{k:5d}  {c.precision:9.3f}  {c.recall:6.3f}  {c.f1:6.3f}")
print(f"macro  {m.macro_precision:9.3f}  {m.macro_recall:6.3f}  {m.macro_f1:6.3f}")
print(f"accuracy {m.accuracy:.3f}")

# ROC sweeps every distinct score as a threshold; AUC is the trapezoid
# under the curve and provably equals the pairwise rank statistic.
scores = np.array([
    [0.70, 0.20, 0.10],
    [0.45, 0.45, 0.10],
    [0.05, 0.80, 0.15],
    [0.30, 0.60, 0.10],
    [0.10, 0.20, 0.70],
    [0.40, 0.48, 0.12],
])
curves, macro = roc_auc(scores, y_true)
print("\none-vs-rest ROC:")
for c in curves:
    points = ", ".join(f"({f:.2f},{t:.2f})" for f, t in zip(c.fpr, c.tpr))
    print(f"  class {c.class_id}: AUC {c.auc:.3f}  points {points}")
print(f"macro AUC {macro:.3f}")

# Paired significance against a seeded random guesser.
rng_preds = random_baseline(y_true, 3, seed=0)
result = mcnemar(y_pred == y_true, rng_preds == y_true)
print(f"\nMcNemar vs random: b={result.b}, c={result.c}, chi2={result.chi2:.3f}, "
      f"significant at 0.05: {result.significant}")
print("(six samples cannot reach significance; the full pipeline runs this "
      "on the test split)")
