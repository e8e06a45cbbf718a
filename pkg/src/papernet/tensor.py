"""Minimal dense tensor with tape-based reverse-mode differentiation.

Training runs in float32; gradient checks run in float64. Every operation
validates that its output is finite and, while a tape is active, records a
backward rule so one reverse sweep yields exact gradients.
"""

from __future__ import annotations

import math
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import NonFiniteError, ShapeError, TapeError

__all__ = [
    "Tensor",
    "ComputationTape",
    "activation",
    "add",
    "backward",
    "clamp_min",
    "concat",
    "gradcheck",
    "log",
    "matmul",
    "mul",
    "neg",
    "pow_scalar",
    "reduce",
    "reduce_max",
    "reduce_mean",
    "reduce_sum",
    "relu",
    "reshape",
    "sigmoid",
    "slice_axis",
    "softmax_lastaxis",
    "sub",
    "tanh",
    "transpose",
]


class Tensor:
    """Dense array with an optional gradient buffer."""

    __slots__ = ("data", "grad", "requires_grad")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float32)
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        if self.size != 1:
            raise ShapeError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(()))

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate_grad(self, g: np.ndarray) -> None:
        if g.shape != self.data.shape:
            raise ShapeError(f"gradient shape {g.shape} does not match data shape {self.shape}")
        if self.grad is None:
            self.grad = g.astype(self.data.dtype, copy=True)
        else:
            self.grad += g

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype}{flag})"

    # Operator sugar; each delegates to the module-level op.
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)


class _TapeNode:
    __slots__ = ("name", "inputs", "output", "rule")

    def __init__(self, name, inputs, output, rule):
        self.name = name
        self.inputs = inputs
        self.output = output
        self.rule = rule


class ComputationTape:
    """Ordered record of executed operations for one backward sweep.

    A tape is active inside its ``with`` block; operations executed there
    append themselves in topological (execution) order. One call to
    :func:`backward` consumes the tape; a second call raises.
    """

    def __init__(self):
        self.nodes: list[_TapeNode] = []
        self.consumed = False

    def __enter__(self) -> "ComputationTape":
        _push_tape(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        _pop_tape(self)

    def record(
        self,
        name: str,
        inputs: Sequence[Tensor],
        output: Tensor,
        rule: Callable[[np.ndarray], tuple],
    ) -> None:
        """Append an operation. ``rule`` maps the output gradient to one
        gradient array (or None) per input, in input order."""
        self.nodes.append(_TapeNode(name, tuple(inputs), output, rule))


_TAPE_STACK: list[ComputationTape] = []


def _push_tape(tape: ComputationTape) -> None:
    _TAPE_STACK.append(tape)


def _pop_tape(tape: ComputationTape) -> None:
    if not _TAPE_STACK or _TAPE_STACK[-1] is not tape:
        raise TapeError("tape context exited out of order")
    _TAPE_STACK.pop()


def _active_tape() -> ComputationTape | None:
    return _TAPE_STACK[-1] if _TAPE_STACK else None


def backward(tape: ComputationTape, loss: Tensor) -> None:
    """Populate ``grad`` on every tensor that contributed to ``loss``."""
    if loss.size != 1:
        raise ShapeError(f"loss must be scalar, got shape {loss.shape}")
    if tape.consumed:
        raise TapeError("tape already consumed by a previous backward pass")
    if not any(node.output is loss for node in tape.nodes):
        raise TapeError("loss tensor was not recorded on this tape")
    tape.consumed = True
    loss.grad = np.ones_like(loss.data)
    for node in reversed(tape.nodes):
        g_out = node.output.grad
        if g_out is None:
            continue
        grads = node.rule(g_out)
        for inp, g in zip(node.inputs, grads):
            if g is None or not inp.requires_grad:
                continue
            inp.accumulate_grad(g)


def _as_tensor(x, like: Tensor | None = None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    dtype = like.dtype if like is not None else None
    return Tensor(np.asarray(x, dtype=dtype))


def _check_finite(arr: np.ndarray, opname: str) -> None:
    # one reduction instead of isfinite().all(): any NaN/Inf makes the
    # float64 sum non-finite, and float32 data cannot overflow it
    if not math.isfinite(float(arr.sum(dtype=np.float64))):
        raise NonFiniteError(f"non-finite values produced by {opname}")


def _make_output(data: np.ndarray, inputs: Sequence[Tensor], name: str, rule) -> Tensor:
    _check_finite(data, name)
    out = Tensor(data, requires_grad=any(t.requires_grad for t in inputs))
    tape = _active_tape()
    if tape is not None and out.requires_grad:
        tape.record(name, inputs, out, rule)
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a gradient over the axes numpy broadcasting introduced."""
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, ext in enumerate(shape) if ext == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# elementwise arithmetic


def add(a, b) -> Tensor:
    a = _as_tensor(a, like=b if isinstance(b, Tensor) else None)
    b = _as_tensor(b, like=a)
    data = a.data + b.data

    def rule(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _make_output(data, (a, b), "add", rule)


def sub(a, b) -> Tensor:
    a = _as_tensor(a, like=b if isinstance(b, Tensor) else None)
    b = _as_tensor(b, like=a)
    data = a.data - b.data

    def rule(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _make_output(data, (a, b), "sub", rule)


def mul(a, b) -> Tensor:
    a = _as_tensor(a, like=b if isinstance(b, Tensor) else None)
    b = _as_tensor(b, like=a)
    data = a.data * b.data

    def rule(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _make_output(data, (a, b), "mul", rule)


def neg(a) -> Tensor:
    a = _as_tensor(a)

    def rule(g):
        return (-g,)

    return _make_output(-a.data, (a,), "neg", rule)


def pow_scalar(a, exponent: float) -> Tensor:
    """Elementwise power with a constant exponent."""
    a = _as_tensor(a)
    data = a.data ** exponent

    def rule(g):
        return (g * exponent * a.data ** (exponent - 1.0),)

    return _make_output(data, (a,), "pow_scalar", rule)


def log(a) -> Tensor:
    a = _as_tensor(a)
    if np.any(a.data <= 0):
        raise NonFiniteError("log of a non-positive value")
    data = np.log(a.data)

    def rule(g):
        return (g / a.data,)

    return _make_output(data, (a,), "log", rule)


def clamp_min(a, floor: float) -> Tensor:
    """max(x, floor); gradient passes only where x > floor."""
    a = _as_tensor(a)
    data = np.maximum(a.data, a.dtype.type(floor))
    passmask = a.data > floor

    def rule(g):
        return (g * passmask,)

    return _make_output(data, (a,), "clamp_min", rule)


# ---------------------------------------------------------------------------
# linear algebra and shape ops


def matmul(a, b) -> Tensor:
    a = _as_tensor(a)
    b = _as_tensor(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul needs 2-D operands, got {a.shape} @ {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul inner extents disagree: {a.shape} @ {b.shape}")
    data = a.data @ b.data

    def rule(g):
        return g @ b.data.T, a.data.T @ g

    return _make_output(data, (a, b), "matmul", rule)


def transpose(a) -> Tensor:
    a = _as_tensor(a)
    if a.ndim != 2:
        raise ShapeError(f"transpose needs a 2-D tensor, got shape {a.shape}")

    def rule(g):
        return (g.T.copy(),)

    return _make_output(a.data.T.copy(), (a,), "transpose", rule)


def reshape(a, shape: Sequence[int]) -> Tensor:
    a = _as_tensor(a)
    shape = tuple(shape)
    data = a.data.reshape(shape)

    def rule(g):
        return (g.reshape(a.shape),)

    return _make_output(data, (a,), "reshape", rule)


def concat(tensors: Iterable[Tensor], axis: int) -> Tensor:
    parts = [_as_tensor(t) for t in tensors]
    if not parts:
        raise ShapeError("concat of zero tensors")
    data = np.concatenate([p.data for p in parts], axis=axis)
    extents = [p.shape[axis] for p in parts]
    offsets = np.cumsum([0] + extents)

    def rule(g):
        return tuple(
            np.take(g, np.arange(offsets[i], offsets[i + 1]), axis=axis)
            for i in range(len(parts))
        )

    return _make_output(data, tuple(parts), "concat", rule)


def slice_axis(a, axis: int, start: int, stop: int) -> Tensor:
    """Contiguous slice [start:stop) along one axis."""
    a = _as_tensor(a)
    if not (0 <= start < stop <= a.shape[axis]):
        raise ShapeError(f"slice [{start}:{stop}) out of range for axis {axis} of {a.shape}")
    index = [slice(None)] * a.ndim
    index[axis] = slice(start, stop)
    index = tuple(index)
    data = a.data[index].copy()

    def rule(g):
        full = np.zeros(a.shape, dtype=g.dtype)
        full[index] = g
        return (full,)

    return _make_output(data, (a,), "slice_axis", rule)


# ---------------------------------------------------------------------------
# activations


def relu(a) -> Tensor:
    a = _as_tensor(a)
    data = np.maximum(a.data, 0)
    mask = a.data > 0

    def rule(g):
        return (g * mask,)

    return _make_output(data, (a,), "relu", rule)


def sigmoid(a) -> Tensor:
    a = _as_tensor(a)
    # tanh form is overflow-free for any input
    data = 0.5 * np.tanh(0.5 * a.data) + 0.5

    def rule(g):
        return (g * data * (1.0 - data),)

    return _make_output(data, (a,), "sigmoid", rule)


def tanh(a) -> Tensor:
    a = _as_tensor(a)
    data = np.tanh(a.data)

    def rule(g):
        return (g * (1.0 - data * data),)

    return _make_output(data, (a,), "tanh", rule)


def softmax_lastaxis(a) -> Tensor:
    """Row-stable softmax along the last axis."""
    a = _as_tensor(a)
    if a.shape[-1] < 1:
        raise ShapeError("softmax needs a non-empty last axis")
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    data = e / e.sum(axis=-1, keepdims=True)

    def rule(g):
        dot = (g * data).sum(axis=-1, keepdims=True)
        return ((g - dot) * data,)

    return _make_output(data, (a,), "softmax_lastaxis", rule)


_ACTIVATIONS = {
    "relu": relu,
    "sigmoid": sigmoid,
    "tanh": tanh,
    "softmax_lastaxis": softmax_lastaxis,
}


def activation(a, kind: str) -> Tensor:
    """Dispatch on activation name: relu | sigmoid | tanh | softmax_lastaxis."""
    try:
        fn = _ACTIVATIONS[kind]
    except KeyError:
        raise ValueError(f"unknown activation kind {kind!r}") from None
    return fn(a)


# ---------------------------------------------------------------------------
# reductions


def _normalize_axes(axis, ndim: int) -> tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(ax % ndim for ax in axis)


def _check_nonempty(a: Tensor, axes: tuple[int, ...], name: str) -> None:
    for ax in axes:
        if a.shape[ax] == 0:
            raise ShapeError(f"{name} over empty axis {ax} of shape {a.shape}")


def reduce_sum(a, axis=None) -> Tensor:
    a = _as_tensor(a)
    axes = _normalize_axes(axis, a.ndim)
    _check_nonempty(a, axes, "sum")
    data = a.data.sum(axis=axes)
    kept = tuple(1 if i in axes else ext for i, ext in enumerate(a.shape))

    def rule(g):
        return (np.broadcast_to(g.reshape(kept), a.shape).astype(g.dtype, copy=True),)

    return _make_output(data, (a,), "reduce_sum", rule)


def reduce_mean(a, axis=None) -> Tensor:
    a = _as_tensor(a)
    axes = _normalize_axes(axis, a.ndim)
    _check_nonempty(a, axes, "mean")
    count = 1
    for ax in axes:
        count *= a.shape[ax]
    data = a.data.mean(axis=axes)
    kept = tuple(1 if i in axes else ext for i, ext in enumerate(a.shape))

    def rule(g):
        scaled = g.reshape(kept) / count
        return (np.broadcast_to(scaled, a.shape).astype(g.dtype, copy=True),)

    return _make_output(data, (a,), "reduce_mean", rule)


def reduce_max(a, axis: int) -> Tensor:
    """Max along one axis; gradient flows to the first maximal index on ties."""
    a = _as_tensor(a)
    if axis is None:
        if a.ndim != 1:
            raise ShapeError("max reduction over a multi-dim tensor needs an explicit axis")
        axis = 0
    (ax,) = _normalize_axes(axis, a.ndim)
    _check_nonempty(a, (ax,), "max")
    data = a.data.max(axis=ax)
    argmax = np.argmax(a.data, axis=ax)

    def rule(g):
        full = np.zeros(a.shape, dtype=g.dtype)
        np.put_along_axis(
            full, np.expand_dims(argmax, ax), np.expand_dims(g, ax), axis=ax
        )
        return (full,)

    return _make_output(data, (a,), "reduce_max", rule)


_REDUCTIONS = {"sum": reduce_sum, "mean": reduce_mean, "max": reduce_max}


def reduce(a, kind: str, axis) -> Tensor:
    """Dispatch on reduction name: sum | mean | max."""
    try:
        fn = _REDUCTIONS[kind]
    except KeyError:
        raise ValueError(f"unknown reduction kind {kind!r}") from None
    return fn(a, axis)


# ---------------------------------------------------------------------------
# gradient checking


def gradcheck(
    fn: Callable[..., Tensor],
    point,
    eps: float = 1e-4,
    max_coords: int | None = None,
    seed: int = 0,
    coord_strategy: str = "random",
) -> float:
    """Compare analytic gradients of ``fn`` against central differences.

    ``fn`` maps the given tensors to an output tensor; non-scalar outputs are
    reduced with a fixed random projection so both gradient routes see the
    same scalar. Inputs must be float64. Returns the max relative error
    |a - n| / max(1e-8, |a| + |n|) over the probed coordinates. With
    ``max_coords`` set, a subset of coordinates per input is probed (needed
    to keep whole-model checks fast): a seeded random draw, or with
    ``coord_strategy="largest"`` the biggest-|gradient| coordinates, where
    the finite difference is well conditioned.
    """
    tensors = [point] if isinstance(point, Tensor) else list(point)
    for t in tensors:
        if t.dtype != np.float64:
            raise ShapeError("gradcheck requires float64 tensors")
        t.requires_grad = True
        t.zero_grad()

    probe = fn(*tensors)
    projection = None
    if probe.size != 1:
        proj_rng = np.random.default_rng(seed)
        projection = Tensor(proj_rng.uniform(0.5, 1.5, size=probe.shape), dtype=np.float64)

    def scalar_eval() -> Tensor:
        out = fn(*tensors)
        if projection is not None:
            out = reduce_sum(mul(out, projection))
        return out

    with ComputationTape() as tape:
        loss = scalar_eval()
        backward(tape, loss)
    analytic = [
        t.grad.copy() if t.grad is not None else np.zeros(t.shape, dtype=np.float64)
        for t in tensors
    ]

    if coord_strategy not in ("random", "largest"):
        raise ValueError(f"unknown coord_strategy {coord_strategy!r}")
    coord_rng = np.random.default_rng(seed + 1)
    max_err = 0.0
    for t, a_grad in zip(tensors, analytic):
        flat = t.data.reshape(-1)
        idx = np.arange(flat.size)
        if max_coords is not None and flat.size > max_coords:
            if coord_strategy == "largest":
                idx = np.argsort(-np.abs(a_grad.reshape(-1)))[:max_coords]
            else:
                idx = coord_rng.choice(flat.size, size=max_coords, replace=False)
        for i in idx:
            orig = flat[i]
            flat[i] = orig + eps
            f_plus = scalar_eval().item()
            flat[i] = orig - eps
            f_minus = scalar_eval().item()
            flat[i] = orig
            numeric = (f_plus - f_minus) / (2.0 * eps)
            analytic_i = a_grad.reshape(-1)[i]
            denom = max(1e-8, abs(analytic_i) + abs(numeric))
            max_err = max(max_err, abs(analytic_i - numeric) / denom)
    return max_err
