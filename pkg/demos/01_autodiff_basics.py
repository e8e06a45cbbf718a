"""A tour of the tensor core: forward ops, the tape, and gradient checking.

Run:  python3 demos/01_autodiff_basics.py
"""

import numpy as np

from papernet.tensor import (
    ComputationTape,
    Tensor,
    backward,
    gradcheck,
    matmul,
    mul,
    reduce_sum,
    sigmoid,
    softmax_lastaxis,
)

# Tensors wrap numpy arrays; requires_grad marks leaves we differentiate.
w = Tensor(np.array([[0.4, -0.7], [1.2, 0.1]]), requires_grad=True, dtype=np.float64)
x = Tensor(np.array([[1.0, 2.0]]), dtype=np.float64)

# Operations executed inside a tape context are recorded in order.
with ComputationTape() as tape:
    hidden = sigmoid(matmul(x, w))
    loss = reduce_sum(mul(hidden, hidden))
    backward(tape, loss)

print("loss             :", loss.item())
print("d loss / d w     :\n", w.grad)

# The tape is single-use: a second backward pass raises.
try:
    backward(tape, loss)
except Exception as exc:
    print("second backward  :", type(exc).__name__, "-", exc)

# Every backward rule is verified against central finite differences.
w64 = Tensor(np.random.default_rng(0).normal(size=(3, 4)), requires_grad=True, dtype=np.float64)
err = gradcheck(lambda t: reduce_sum(mul(sigmoid(t), sigmoid(t))), w64)
print(f"gradcheck sigmoid chain: max relative error {err:.2e}")

# Softmax rows always sum to one; the checker works on any composite.
logits = Tensor(np.random.default_rng(1).normal(size=(2, 5)), requires_grad=True, dtype=np.float64)
probs = softmax_lastaxis(logits)
print("softmax row sums :", probs.data.sum(axis=1))
err = gradcheck(softmax_lastaxis, logits)
print(f"gradcheck softmax: max relative error {err:.2e}")
