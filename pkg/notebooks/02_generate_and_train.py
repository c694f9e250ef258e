"""
Synthetic corpus and the desk-scale encoder
===========================================

Generates the 3284-statement corpus, checks the arithmetic of every
statement, trains the small numpy transformer and saves a checkpoint.
Takes about half a minute per epoch on one core.
"""

# %%
from pathlib import Path

import numpy as np

from mathrel.data import SplitSpec, class_distribution, generate_synthetic, save_corpus, split, validate_statement
from mathrel.model import TrainConfig, save_checkpoint, train

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

corpus = generate_synthetic(3284, seed=7)
save_corpus(corpus, OUT / "corpus.csv")
for label, frac in class_distribution(corpus).items():
    print(f"{label.display:15s} {frac:7.2%}")

# %%
statuses = [validate_statement(s).status for s in corpus]
print({s: statuses.count(s) for s in set(statuses)})
for s in corpus.statements[:5]:
    print(f"[{s.relation.display}] {s.text}   ({s.entity1} | {s.entity2})")

# %%
train_set, test_set = split(corpus, SplitSpec(0.8, 0))
print(len(train_set), "train /", len(test_set), "test")

model, history = train(train_set, test_set, train_config=TrainConfig(epochs=10, seed=0, verbose=1))
save_checkpoint(model.parameters, model.config, model.vocab, OUT / "checkpoint.json")
history.to_csv(OUT / "history.csv")

# %%
print("loss by epoch:", np.round(history.train_loss, 4))
print("held-out accuracy:", history.val_accuracy[-1])
