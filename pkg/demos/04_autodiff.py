"""The tape-based reverse-mode engine behind training.

Records a small attention-style computation, backpropagates, and compares
against finite differences with the built-in checker.
"""

import numpy as np

from graphident import autodiff as ad

rng = np.random.default_rng(0)

# Record: scalar loss of a softmax-attention mix.
tape = ad.Tape()
X = tape.leaf(rng.normal(size=(4, 3)))
mixed = ad.matmul(ad.softmax_rows(ad.scale(
    ad.matmul(X, ad.transpose(X)), 1 / np.sqrt(3))), X)
loss = ad.asum(ad.mul(mixed, mixed))
print("forward value:", float(loss.value))

grads = ad.backward(tape, loss)
print("gradient shape:", grads[X].shape)

# The checker rebuilds the computation per coordinate and compares against
# central differences.
report = ad.gradient_check(
    lambda leaves: ad.asum(ad.mul(
        ad.matmul(ad.softmax_rows(ad.scale(
            ad.matmul(leaves[0], ad.transpose(leaves[0])), 1 / np.sqrt(3))),
            leaves[0]),
        leaves[0])),
    [rng.normal(size=(4, 3))])
print(f"finite-difference check: max rel error {report.max_rel_error:.2e},"
      f" passed={report.passed}")

# Clamp subgradients follow the convention grad=0 at the kink.
tape = ad.Tape()
x = tape.leaf(np.array([-1.0, 0.0, 2.0]))
g = ad.backward(tape, ad.asum(ad.relu(x)))[x]
print("relu subgradients at [-1, 0, 2]:", g)
