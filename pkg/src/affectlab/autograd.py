"""Dense tensors with tape-based reverse-mode differentiation.

Operations run eagerly on numpy arrays.  While a :class:`Tape` is active
(``with Tape() as tape:``) every op whose inputs need gradients is appended
to the tape together with its backward rule; ``tape.backward(loss)`` then
walks the tape in exact reverse order.  Outside a tape ops are plain numpy
computations, which is what inference uses.
"""

import itertools
import threading

import numpy as np

from .errors import IndexOutOfRange, NonScalarLoss, ShapeMismatch

_ids = itertools.count()
_local = threading.local()


def _active_tape():
    stack = getattr(_local, "stack", None)
    return stack[-1] if stack else None


class Tensor:
    __slots__ = ("data", "requires_grad", "id", "name")

    def __init__(self, data, requires_grad=False, name="", dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype.kind != "f":
            arr = arr.astype(np.float64)
        self.data = arr
        self.requires_grad = requires_grad
        self.id = next(_ids)
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def numpy(self):
        return self.data

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.shape}, dtype={self.dtype})"

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


def as_tensor(x, like=None):
    if isinstance(x, Tensor):
        return x
    dtype = like.dtype if like is not None else None
    return Tensor(x, dtype=dtype)


class _Node:
    __slots__ = ("inputs", "output", "backward")

    def __init__(self, inputs, output, backward):
        self.inputs = inputs
        self.output = output
        self.backward = backward


class Gradients:
    """Gradient lookup keyed by tensor; tensors the loss never reached get zeros."""

    def __init__(self, grads, tensors):
        self._grads = grads
        self._tensors = tensors

    def __getitem__(self, tensor):
        g = self._grads.get(tensor.id)
        return g if g is not None else np.zeros_like(tensor.data)

    def __contains__(self, tensor):
        return tensor.id in self._grads

    def items(self):
        for tid, g in self._grads.items():
            yield self._tensors[tid], g


class Tape:
    """Ordered record of differentiable operations."""

    def __init__(self):
        self.nodes = []

    def __enter__(self):
        if not hasattr(_local, "stack"):
            _local.stack = []
        _local.stack.append(self)
        return self

    def __exit__(self, *exc):
        _local.stack.pop()

    def __len__(self):
        return len(self.nodes)

    def record(self, inputs, output, backward):
        self.nodes.append(_Node(inputs, output, backward))

    def backward(self, loss):
        """Gradients of scalar ``loss`` with respect to every recorded input."""
        if loss.data.size != 1:
            raise NonScalarLoss(f"loss must be scalar, got shape {loss.shape}")
        grads = {loss.id: np.ones_like(loss.data)}
        tensors = {loss.id: loss}
        for node in reversed(self.nodes):
            g_out = grads.get(node.output.id)
            if g_out is None:
                continue
            for t, g in zip(node.inputs, node.backward(g_out)):
                if g is None or not t.requires_grad:
                    continue
                tensors[t.id] = t
                if t.id in grads:
                    grads[t.id] = grads[t.id] + g
                else:
                    grads[t.id] = g
        return Gradients(grads, tensors)


def _result(data, inputs, backward):
    """Wrap ``data`` and record it on the active tape when needed."""
    tape = _active_tape()
    needs = tape is not None and any(t.requires_grad for t in inputs)
    out = Tensor(data, requires_grad=needs)
    if needs:
        tape.record(inputs, out, backward)
    return out


def _unbroadcast(g, shape):
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _pair(a, b):
    """Promote plain numbers to tensors of the other operand's dtype."""
    if not isinstance(a, Tensor):
        a = as_tensor(a, like=b if isinstance(b, Tensor) else None)
    if not isinstance(b, Tensor):
        b = as_tensor(b, like=a)
    return a, b


def _broadcast_shape(a, b, op):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeMismatch(f"{op}: cannot broadcast {a.shape} with {b.shape}") from None


def add(a, b):
    a, b = _pair(a, b)
    _broadcast_shape(a, b, "add")
    return _result(a.data + b.data, (a, b),
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b):
    a, b = _pair(a, b)
    _broadcast_shape(a, b, "sub")
    return _result(a.data - b.data, (a, b),
                   lambda g: (_unbroadcast(g, a.shape), -_unbroadcast(g, b.shape)))


def mul(a, b):
    a, b = _pair(a, b)
    _broadcast_shape(a, b, "mul")
    def backward(g):
        ga = _unbroadcast(g * b.data, a.shape) if a.requires_grad else None
        gb = _unbroadcast(g * a.data, b.shape) if b.requires_grad else None
        return ga, gb

    return _result(a.data * b.data, (a, b), backward)


def neg(a):
    return _result(-a.data, (a,), lambda g: (-g,))


def matmul(a, b):
    """Matrix product over the last two axes; leading axes broadcast."""
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim < 2 or b.data.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeMismatch(f"matmul: incompatible shapes {a.shape} and {b.shape}")

    def backward(g):
        ga = _unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.shape) if a.requires_grad else None
        gb = _unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape) if b.requires_grad else None
        return ga, gb

    return _result(a.data @ b.data, (a, b), backward)


def tanh(a):
    y = np.tanh(a.data)
    return _result(y, (a,), lambda g: (g * (1.0 - y * y),))


def sigmoid(a):
    y = 0.5 * (1.0 + np.tanh(0.5 * a.data))
    return _result(y, (a,), lambda g: (g * y * (1.0 - y),))


def _softmax(x):
    z = x - x.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax(a):
    """Softmax over the last axis, max-subtracted for stability."""
    y = _softmax(a.data)
    return _result(y, (a,), lambda g: (y * (g - (g * y).sum(axis=-1, keepdims=True)),))


def concat(tensors, axis=-1):
    tensors = [as_tensor(t) for t in tensors]
    try:
        data = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        raise ShapeMismatch(f"concat: {exc}") from None
    bounds = np.cumsum([0] + [t.shape[axis] for t in tensors])

    def backward(g):
        return [np.take(g, np.arange(lo, hi), axis=axis) for lo, hi in zip(bounds[:-1], bounds[1:])]

    return _result(data, tuple(tensors), backward)


def slice(a, start, stop, axis=-1):
    """``a[..., start:stop]`` along ``axis`` with strict bounds."""
    n = a.shape[axis]
    if not 0 <= start < stop <= n:
        raise IndexOutOfRange(f"slice [{start}:{stop}] out of range for axis of length {n}")
    index = [np.s_[:]] * a.data.ndim
    index[axis] = np.s_[start:stop]
    index = tuple(index)

    def backward(g):
        full = np.zeros_like(a.data)
        full[index] = g
        return (full,)

    return _result(a.data[index], (a,), backward)


def stack(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    try:
        data = np.stack([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        raise ShapeMismatch(f"stack: {exc}") from None

    def backward(g):
        return [np.take(g, i, axis=axis) for i in range(len(tensors))]

    return _result(data, tuple(tensors), backward)


def reshape(a, shape):
    try:
        data = a.data.reshape(shape)
    except ValueError as exc:
        raise ShapeMismatch(f"reshape: {exc}") from None
    return _result(data, (a,), lambda g: (g.reshape(a.shape),))


def sum(a, axis=None):
    def backward(g):
        if axis is not None:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return _result(a.data.sum(axis=axis), (a,), backward)


def cross_entropy(logits, labels):
    """-log softmax(logits)[label] per row of the last axis.

    ``labels`` is an int for a single logit vector or an integer array
    matching the leading shape of ``logits``.
    """
    C = logits.shape[-1]
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != logits.shape[:-1]:
        raise ShapeMismatch(f"cross_entropy: labels {labels.shape} vs logits {logits.shape}")
    if np.any(labels < 0) or np.any(labels >= C):
        raise IndexOutOfRange(f"class index out of range for {C} classes")
    x = logits.data
    z = x - x.max(axis=-1, keepdims=True)
    logz = np.log(np.exp(z).sum(axis=-1, keepdims=True))
    logp = z - logz
    picked = np.take_along_axis(logp, labels[..., None], axis=-1)[..., 0]

    def backward(g):
        grad = np.exp(logp)
        np.put_along_axis(grad, labels[..., None],
                          np.take_along_axis(grad, labels[..., None], axis=-1) - 1.0, axis=-1)
        return (grad * np.asarray(g)[..., None],)

    return _result(-picked, (logits,), backward)


def parameter(data, name="", dtype=np.float64):
    return Tensor(np.array(data, dtype=dtype), requires_grad=True, name=name)
