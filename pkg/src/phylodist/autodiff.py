"""Reverse-mode automatic differentiation over dense numpy arrays.

Every operation appends a node to an implicit tape (the expression graph):
nodes cache their forward value, know how to push gradients to their parents,
and record a pure re-execution closure so a recorded graph can be replayed
bit-identically from its leaves.  ``backward()`` on a scalar fills the
``grad`` buffer of every reachable tensor.

The op set is exactly what the network layers and losses require; reductions
that must be invariant to input permutations (site sums in equivariant
layers, pooling) use ``ordered_sum``, which sorts before summing so the
result depends only on the multiset of addends.
"""

import numpy as np

from .errors import NumericError

_EIG_FLOOR = 1e-10


def _unbroadcast(grad, shape):
    """Sum a broadcast gradient back down to the original shape."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_push", "_forward")

    def __init__(self, data, requires_grad=False, _parents=(), _push=None, _forward=None):
        self.data = np.asarray(data, dtype=float)
        self.grad = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in _parents)
        self._parents = _parents
        self._push = _push
        self._forward = _forward

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def item(self):
        return float(self.data)

    # -- graph walking -----------------------------------------------------

    def _topo(self):
        order, seen, stack = [], set(), [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                stack.append((p, False))
        return order

    def backward(self):
        """Reverse-mode gradients of this scalar w.r.t. every reachable tensor."""
        if self.data.size != 1:
            raise NumericError("backward() requires a scalar output")
        order = self._topo()
        for node in order:
            node.grad = None
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._push is None or node.grad is None:
                continue
            node._push(node.grad)

    def replay(self):
        """Re-execute the recorded graph from its leaves; returns the value."""
        order = self._topo()
        values = {}
        for node in order:
            if node._forward is None:
                values[id(node)] = node.data
            else:
                values[id(node)] = node._forward(*(values[id(p)] for p in node._parents))
        return values[id(self)]

    def _accumulate(self, g):
        g = np.asarray(g, dtype=float)
        if self.grad is None:
            self.grad = g
        else:
            self.grad = self.grad + g

    # -- operators ----------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __rsub__(self, other):
        return add(mul(self, -1.0), other)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            return mul(self, power(other, -1.0))
        return mul(self, 1.0 / other)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, k):
        return power(self, k)

    def __getitem__(self, idx):
        return take(self, idx)

    def sum(self, axis=None, keepdims=False):
        return tensor_sum(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 else shape[0])

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def parameter(data, rng=None, scale=None):
    """Trainable tensor; optionally randomly initialized from rng."""
    if rng is not None:
        data = rng.normal(0.0, scale if scale is not None else 1.0, size=data)
    return Tensor(np.array(data, dtype=float), requires_grad=True)


def _node(data, parents, push, forward):
    return Tensor(data, _parents=tuple(parents), _push=push, _forward=forward)


# -- arithmetic ------------------------------------------------------------------


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data + b.data

    def push(g):
        a._accumulate(_unbroadcast(g, a.data.shape))
        b._accumulate(_unbroadcast(g, b.data.shape))

    return _node(out_data, (a, b), push, lambda x, y: x + y)


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data * b.data

    def push(g):
        a._accumulate(_unbroadcast(g * b.data, a.data.shape))
        b._accumulate(_unbroadcast(g * a.data, b.data.shape))

    return _node(out_data, (a, b), push, lambda x, y: x * y)


def power(a, k):
    a = as_tensor(a)
    k = float(k)
    out_data = a.data**k

    def push(g):
        a._accumulate(g * k * a.data ** (k - 1.0))

    return _node(out_data, (a,), push, lambda x: x**k)


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data @ b.data

    def push(g):
        g = np.asarray(g)
        x, y = a.data, b.data
        if x.ndim == 1 and y.ndim == 1:
            ga, gb = g * y, g * x
        elif x.ndim == 1:
            ga = g @ np.swapaxes(y, -1, -2)
            gb = x[:, None] * g[..., None, :]
        elif y.ndim == 1:
            ga = g[..., :, None] * y[None, :]
            gb = np.swapaxes(x, -1, -2) @ g
        else:
            ga = g @ np.swapaxes(y, -1, -2)
            gb = np.swapaxes(x, -1, -2) @ g
        a._accumulate(_unbroadcast(np.asarray(ga), x.shape))
        b._accumulate(_unbroadcast(np.asarray(gb), y.shape))

    return _node(out_data, (a, b), push, lambda x, y: x @ y)


# -- elementwise nonlinearities -----------------------------------------------------


def exp(a):
    a = as_tensor(a)
    out_data = np.exp(a.data)

    def push(g):
        a._accumulate(g * out_data)

    return _node(out_data, (a,), push, np.exp)


def log(a):
    a = as_tensor(a)
    out_data = np.log(a.data)

    def push(g):
        a._accumulate(g / a.data)

    return _node(out_data, (a,), push, np.log)


def sqrt(a):
    """Square root with a zero subgradient at zero (safe for exact ties)."""
    a = as_tensor(a)
    out_data = np.sqrt(a.data)

    def push(g):
        denom = 2.0 * out_data
        safe = np.where(denom == 0.0, np.inf, denom)
        a._accumulate(g / safe)

    return _node(out_data, (a,), push, np.sqrt)


def absolute(a):
    a = as_tensor(a)
    out_data = np.abs(a.data)

    def push(g):
        a._accumulate(g * np.sign(a.data))

    return _node(out_data, (a,), push, np.abs)


def relu(a):
    a = as_tensor(a)
    out_data = np.maximum(a.data, 0.0)

    def push(g):
        a._accumulate(g * (a.data > 0.0))

    return _node(out_data, (a,), push, lambda x: np.maximum(x, 0.0))


def elu(a, alpha=1.0):
    a = as_tensor(a)
    neg = alpha * np.expm1(np.minimum(a.data, 0.0))
    out_data = np.where(a.data > 0.0, a.data, neg)

    def push(g):
        a._accumulate(g * np.where(a.data > 0.0, 1.0, neg + alpha))

    def fwd(x):
        return np.where(x > 0.0, x, alpha * np.expm1(np.minimum(x, 0.0)))

    return _node(out_data, (a,), push, fwd)


def softplus(a):
    a = as_tensor(a)
    out_data = np.logaddexp(0.0, a.data)

    def push(g):
        a._accumulate(g / (1.0 + np.exp(-a.data)))

    return _node(out_data, (a,), push, lambda x: np.logaddexp(0.0, x))


ACTIVATIONS = {
    "relu": relu,
    "elu": elu,
    "softplus": softplus,
    "identity": lambda t: t,
}


# -- reductions ----------------------------------------------------------------------


def tensor_sum(a, axis=None, keepdims=False):
    a = as_tensor(a)
    out_data = a.data.sum(axis=axis, keepdims=keepdims)

    def push(g):
        g = np.asarray(g)
        if axis is None:
            a._accumulate(np.broadcast_to(g, a.data.shape))
            return
        if not keepdims:
            g = np.expand_dims(g, axis)
        a._accumulate(np.broadcast_to(g, a.data.shape))

    return _node(out_data, (a,), push, lambda x: x.sum(axis=axis, keepdims=keepdims))


def ordered_sum(a, axis, keepdims=False):
    """Sum along one axis with the addends sorted first.

    The value depends only on the multiset of addends, so any permutation
    along the axis produces a bit-identical result.
    """
    a = as_tensor(a)

    def fwd(x):
        # contiguous layout pins numpy's pairwise-summation blocking
        s = np.ascontiguousarray(np.sort(x, axis=axis))
        return s.sum(axis=axis, keepdims=keepdims)

    out_data = fwd(a.data)

    def push(g):
        g = np.asarray(g)
        if not keepdims:
            g = np.expand_dims(g, axis)
        a._accumulate(np.broadcast_to(g, a.data.shape))

    return _node(out_data, (a,), push, fwd)


def mean(a, axis=None, keepdims=False):
    a = as_tensor(a)
    count = a.data.size if axis is None else a.data.shape[axis]
    return mul(tensor_sum(a, axis=axis, keepdims=keepdims), 1.0 / count)


def softmax(a, axis=-1):
    a = as_tensor(a)

    def fwd(x):
        z = x - x.max(axis=axis, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=axis, keepdims=True)

    out_data = fwd(a.data)

    def push(g):
        inner = (g * out_data).sum(axis=axis, keepdims=True)
        a._accumulate(out_data * (g - inner))

    return _node(out_data, (a,), push, fwd)


# -- shape ops --------------------------------------------------------------------------


def reshape(a, shape):
    a = as_tensor(a)
    orig = a.data.shape

    def push(g):
        a._accumulate(np.asarray(g).reshape(orig))

    return _node(a.data.reshape(shape), (a,), push, lambda x: x.reshape(shape))


def moveaxis(a, source, destination):
    a = as_tensor(a)

    def push(g):
        a._accumulate(np.moveaxis(np.asarray(g), destination, source))

    return _node(
        np.moveaxis(a.data, source, destination),
        (a,),
        push,
        lambda x: np.moveaxis(x, source, destination),
    )


def take(a, idx):
    a = as_tensor(a)

    def push(g):
        buf = np.zeros_like(a.data)
        np.add.at(buf, idx, np.asarray(g))
        a._accumulate(buf)

    return _node(a.data[idx], (a,), push, lambda x: x[idx])


def concat(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def push(g):
        for t, piece in zip(tensors, np.split(np.asarray(g), splits, axis=axis)):
            t._accumulate(piece)

    return _node(
        np.concatenate([t.data for t in tensors], axis=axis),
        tuple(tensors),
        push,
        lambda *xs: np.concatenate(xs, axis=axis),
    )


def stack(tensors, axis=0):
    return concat([reshape(t, t.data.shape[:axis] + (1,) + t.data.shape[axis:]) for t in tensors], axis=axis)


# -- matrix ops for the covariance losses ---------------------------------------------------


def inv(a):
    a = as_tensor(a)
    out_data = np.linalg.inv(a.data)

    def push(g):
        t = out_data.T
        a._accumulate(-t @ np.asarray(g) @ t)

    return _node(out_data, (a,), push, np.linalg.inv)


def logdet(a):
    """log|A| for symmetric positive definite A (eigenvalues floored)."""
    a = as_tensor(a)

    def fwd(x):
        w = np.linalg.eigvalsh((x + x.T) / 2.0)
        return np.log(np.maximum(w, _EIG_FLOOR)).sum()

    out_data = fwd(a.data)

    def push(g):
        w, v = np.linalg.eigh((a.data + a.data.T) / 2.0)
        w = np.maximum(w, _EIG_FLOOR)
        a._accumulate(np.asarray(g) * (v / w) @ v.T)

    return _node(out_data, (a,), push, fwd)


def symlog(a):
    """Matrix logarithm of a symmetric PSD matrix, eigenvalues floored."""
    a = as_tensor(a)

    def decompose(x):
        w, v = np.linalg.eigh((x + x.T) / 2.0)
        return np.maximum(w, _EIG_FLOOR), v

    def fwd(x):
        w, v = decompose(x)
        return (v * np.log(w)) @ v.T

    out_data = fwd(a.data)

    def push(g):
        w, v = decompose(a.data)
        lw = np.log(w)
        diff = w[:, None] - w[None, :]
        ratio = np.where(
            np.abs(diff) > 1e-12 * max(1.0, w.max()),
            (lw[:, None] - lw[None, :]) / np.where(diff == 0.0, 1.0, diff),
            1.0 / w[None, :],
        )
        gs = (np.asarray(g) + np.asarray(g).T) / 2.0
        a._accumulate(v @ (ratio * (v.T @ gs @ v)) @ v.T)

    return _node(out_data, (a,), push, fwd)


def trace(a):
    a = as_tensor(a)
    eye = np.eye(a.data.shape[-1])
    return tensor_sum(mul(a, eye))


# -- gradient utilities -------------------------------------------------------------------


def gradients(loss, params):
    """Backward pass; returns the gradient arrays of the given parameters."""
    loss.backward()
    return [np.zeros_like(p.data) if p.grad is None else p.grad for p in params]


def finite_difference_check(f, params, h=1e-4, tol=1e-4):
    """Compare reverse-mode gradients of f() against central differences.

    Returns the worst relative error max |a-fd| / max(|a|+|fd|, 1e-6) over
    every coordinate of every parameter; raises nothing.
    """
    loss = f()
    analytic = gradients(loss, params)
    worst = 0.0
    for p, a in zip(params, analytic):
        flat = p.data.reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + h
            up = float(f().data)
            flat[idx] = orig - h
            down = float(f().data)
            flat[idx] = orig
            fd = (up - down) / (2.0 * h)
            a_i = float(a.reshape(-1)[idx])
            rel = abs(a_i - fd) / max(abs(a_i) + abs(fd), 1e-6)
            worst = max(worst, rel)
    del tol
    return worst
