"""
Confusion matrix and per-class metrics
======================================

Evaluates the checkpoint from 02 on the held-out split, then recomputes
the metrics from a published per-class count table to see
how far its rounding drifts.
"""

# %%
from pathlib import Path

from mathrel.data import SplitSpec, load_corpus, split
from mathrel.metrics import PerClassCounts, build_confusion, compute_report, report_from_counts
from mathrel.model import Model, load_checkpoint

OUT = Path(__file__).parent / "out"
params, cfg, vocab = load_checkpoint(OUT / "checkpoint.json")
model = Model(params, cfg, vocab)
_, test_set = split(load_corpus(OUT / "corpus.csv"), SplitSpec(0.8, 0))

pred = [int(p) for p in model.predict(test_set.texts)]
true = [int(s.relation) for s in test_set]
matrix = build_confusion(true, pred)
print(matrix.counts)

# %%
rep = compute_report(matrix)
print(rep.render())
# micro precision, recall and F1 all collapse to accuracy for single-label data
print(rep.micro["precision"], rep.micro["recall"], rep.accuracy)

# %%
# printed per-class counts (TP, TN, FP, FN)
printed = {
    "Factorial": (70, 466, 0, 0), "Addition": (99, 459, 8, 1), "Subtraction": (96, 467, 0, 2),
    "Multiplication": (116, 449, 4, 0), "Division": (101, 454, 0, 4), "Square Root": (163, 392, 0, 0),
}
table = report_from_counts([PerClassCounts(k, *v) for k, v in printed.items()])
print(table.render())
fp = sum(v[2] for v in printed.values())
fn = sum(v[3] for v in printed.values())
print(f"sum FP = {fp}, sum FN = {fn}  (one confusion matrix would force these equal)")
