"""Flocking simulation and windowed ground-truth graphs.

Simulates a swarm converging on a goal, splits the run into windows, and
shows how the interaction graph densifies as the flock contracts.
"""

import numpy as np

from graphident.datagen import FlockingSpec, generate_flocking_windows
from graphident.evaluate import identify_fixed
from graphident.graphcore import edge_density, mae

spec = FlockingSpec(n=20, seed=4)
records = generate_flocking_windows(spec)
print(f"simulated {spec.duration}s at dt={spec.dt}: {len(records)} windows "
      f"of d={spec.d}")

print("\nwindow  density   mean_weight")
for k, rec in enumerate(records):
    print(f"{k:6d}  {edge_density(rec.W):7.3f}   {rec.W.mean():.4f}")

# Identify a sparse early window and a dense late window with fixed
# regularizers; the mismatch across regimes is what the trained encoder's
# adaptive regularizers remove.
for k in (0, len(records) - 1):
    rec = records[k]
    W_hat = identify_fixed(rec.X, alpha=0.1, beta=1e-5)
    print(f"\nwindow {k}: density {edge_density(rec.W):.3f}, "
          f"fixed-parameter MAE {mae(W_hat, rec.W):.4f}")
