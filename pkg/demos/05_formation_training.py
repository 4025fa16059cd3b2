"""Desk-size end-to-end training on a formation graph.

Trains the encoder on one random graph for a few hundred steps and shows
the identification error falling, then evaluates on a fresh graph.
Takes roughly half a minute.
"""

import numpy as np

from graphident import training
from graphident.datagen import (FormationSpec, generate_formation_sample,
                                sample_er_graph, sample_smooth_signals)
from graphident.encoder import formation_params
from graphident.evaluate import identify_fixed, identify_with_encoder
from graphident.graphcore import mae

spec = FormationSpec(n=10, p=0.2, sigma=0.1, d=500, seed=42)
record = generate_formation_sample(spec)
print(f"training graph: n={spec.n}, {int(record.W.sum() / 2)} edges")

cfg = training.TrainConfig(total_steps=400, unroll_steps=30, seed=0)
state, metrics = training.train([record], cfg,
                                params=formation_params(seed=0))
for k in (0, 100, 200, 399):
    m = metrics[k]
    print(f"step {m['step']:4d}: loss {m['loss']:8.3f}  mae {m['mae']:.4f}  "
          f"alpha {m['alpha']:6.2f}  beta {m['beta']:.4f}")

# Fresh graph, same size: trained encoder vs the fixed-parameter reference.
# 400 steps is a small fraction of a full run, so treat the numbers as a
# progress snapshot, not a final comparison.
W_test = sample_er_graph(10, 0.2, seed=100)
X_test = sample_smooth_signals(W_test, 0.1, 500, seed=101)
W_trained, alpha, beta = identify_with_encoder(X_test, state.params)
W_base = identify_fixed(X_test, alpha=0.2, beta=1e-4)
print(f"\nfresh-graph MAE, trained encoder:  {mae(W_trained, W_test):.4f} "
      f"(alpha={alpha:.2f}, beta={beta:.4f})")
print(f"fresh-graph MAE, fixed reference:  {mae(W_base, W_test):.4f}")
