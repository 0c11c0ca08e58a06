"""Tiny reverse-mode differentiation over numpy arrays.

Only the operations the objectives and the toy MLP need are provided. Every
value is float64. Gradients flow back through a topologically sorted tape
built from each node's parents.
"""

import numpy as np


def _unbroadcast(grad, shape):
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _lift(x):
    return x if isinstance(x, Var) else Var(x, requires_grad=False)


class Var:
    __array_priority__ = 100

    def __init__(self, value, parents=(), requires_grad=True):
        self.value = np.asarray(value, dtype=np.float64)
        self.parents = parents  # tuple of (Var, backward_fn)
        self.requires_grad = requires_grad or any(p.requires_grad for p, _ in parents)
        self.grad = None

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Var(shape={self.value.shape})"

    # arithmetic -----------------------------------------------------------

    def __add__(self, other):
        other = _lift(other)
        return Var(
            self.value + other.value,
            (
                (self, lambda g: _unbroadcast(g, self.shape)),
                (other, lambda g: _unbroadcast(g, other.shape)),
            ),
        )

    __radd__ = __add__

    def __neg__(self):
        return Var(-self.value, ((self, lambda g: -g),))

    def __sub__(self, other):
        return self + (-_lift(other))

    def __rsub__(self, other):
        return _lift(other) + (-self)

    def __mul__(self, other):
        other = _lift(other)
        a, b = self.value, other.value
        return Var(
            a * b,
            (
                (self, lambda g: _unbroadcast(g * b, self.shape)),
                (other, lambda g: _unbroadcast(g * a, other.shape)),
            ),
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _lift(other)
        a, b = self.value, other.value
        return Var(
            a / b,
            (
                (self, lambda g: _unbroadcast(g / b, self.shape)),
                (other, lambda g: _unbroadcast(-g * a / (b * b), other.shape)),
            ),
        )

    def __rtruediv__(self, other):
        return _lift(other) / self

    def __pow__(self, p):
        p = float(p)
        a = self.value
        return Var(a**p, ((self, lambda g: g * p * a ** (p - 1)),))

    def __matmul__(self, other):
        other = _lift(other)
        a, b = self.value, other.value
        return Var(
            a @ b,
            (
                (self, lambda g: g @ np.swapaxes(b, -1, -2)),
                (other, lambda g: np.swapaxes(a, -1, -2) @ g),
            ),
        )

    def __getitem__(self, index):
        shape = self.shape

        def back(g):
            out = np.zeros(shape)
            np.add.at(out, index, g)
            return out

        return Var(self.value[index], ((self, back),))

    @property
    def T(self):
        return Var(self.value.T, ((self, lambda g: g.T),))

    def reshape(self, *shape):
        old = self.shape
        return Var(self.value.reshape(*shape), ((self, lambda g: g.reshape(old)),))

    def sum(self, axis=None, keepdims=False):
        shape = self.shape

        def back(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return np.broadcast_to(g, shape).copy()

        return Var(self.value.sum(axis=axis, keepdims=keepdims), ((self, back),))

    def mean(self, axis=None):
        count = self.value.size if axis is None else self.shape[axis]
        return self.sum(axis=axis) / count

    # backprop -------------------------------------------------------------

    def backward(self, seed=None):
        order, seen = [], set()

        def visit(node):
            stack = [(node, False)]
            while stack:
                cur, done = stack.pop()
                if done:
                    order.append(cur)
                    continue
                if id(cur) in seen:
                    continue
                seen.add(id(cur))
                stack.append((cur, True))
                for parent, _ in cur.parents:
                    if parent.requires_grad and id(parent) not in seen:
                        stack.append((parent, False))

        visit(self)
        grads = {id(self): np.ones_like(self.value) if seed is None else np.asarray(seed, float)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if not node.parents:
                node.grad = g if node.grad is None else node.grad + g
                continue
            for parent, fn in node.parents:
                if not parent.requires_grad:
                    continue
                pg = fn(g)
                key = id(parent)
                grads[key] = pg if key not in grads else grads[key] + pg


# elementwise functions ---------------------------------------------------------


def exp(x):
    out = np.exp(x.value)
    return Var(out, ((x, lambda g: g * out),))


def log(x, floor=1e-30):
    a = np.maximum(x.value, floor)
    return Var(np.log(a), ((x, lambda g: np.where(x.value > floor, g / a, 0.0)),))


def sqrt(x):
    """Square root whose derivative at zero is taken as zero."""
    a = np.maximum(x.value, 0.0)
    out = np.sqrt(a)
    safe = np.where(out > 0, out, 1.0)
    return Var(out, ((x, lambda g: np.where(out > 0, g / (2 * safe), 0.0)),))


def relu(x):
    mask = x.value > 0
    return Var(np.where(mask, x.value, 0.0), ((x, lambda g: g * mask),))


def absolute(x):
    sign = np.sign(x.value)
    return Var(np.abs(x.value), ((x, lambda g: g * sign),))


def cos(x):
    a = x.value
    return Var(np.cos(a), ((x, lambda g: -g * np.sin(a)),))


def tan(x):
    a = x.value
    return Var(np.tan(a), ((x, lambda g: g / np.cos(a) ** 2),))


def arccos(x):
    a = x.value
    return Var(np.arccos(a), ((x, lambda g: -g / np.sqrt(1.0 - a * a)),))


def clip(x, lo, hi):
    a = x.value
    inside = (a >= lo) & (a <= hi)
    return Var(np.clip(a, lo, hi), ((x, lambda g: g * inside),))


def where(cond, x, y):
    x, y = _lift(x), _lift(y)
    cond = np.asarray(cond, dtype=bool)
    return Var(
        np.where(cond, x.value, y.value),
        (
            (x, lambda g: _unbroadcast(np.where(cond, g, 0.0), x.shape)),
            (y, lambda g: _unbroadcast(np.where(cond, 0.0, g), y.shape)),
        ),
    )


def logsumexp(x, axis=-1, mask=None, include_zero=False):
    """Masked log-sum-exp along ``axis``.

    With ``include_zero`` an implicit extra term exp(0) joins the sum, giving
    log(1 + sum(exp(x))). Rows whose mask is empty evaluate to -inf, or to 0
    when ``include_zero`` is set.
    """
    a = x.value
    mask = np.ones(a.shape, dtype=bool) if mask is None else np.broadcast_to(mask, a.shape)
    masked = np.where(mask, a, -np.inf)
    m = np.max(masked, axis=axis, keepdims=True)
    if include_zero:
        m = np.maximum(m, 0.0)
    m = np.where(np.isfinite(m), m, 0.0)
    e = np.where(mask, np.exp(masked - m), 0.0)
    total = e.sum(axis=axis, keepdims=True)
    if include_zero:
        total = total + np.exp(-m)
    with np.errstate(divide="ignore"):
        out = np.log(total) + m
    safe_total = np.where(total > 0, total, 1.0)
    weights = e / safe_total

    def back(g):
        return np.expand_dims(g, axis) * weights

    return Var(np.squeeze(out, axis=axis), ((x, back),))


# composites --------------------------------------------------------------------


def row_norms(x):
    return sqrt((x * x).sum(axis=-1))


def normalize_rows(x):
    return x / row_norms(x).reshape(*x.shape[:-1], 1)


def gathered_distances(x, i, j):
    """Euclidean distances between rows ``x[i]`` and ``x[j]``."""
    diff = x[i] - x[j]
    return sqrt((diff * diff).sum(axis=-1))


def all_pair_distances(x):
    n, d = x.shape
    diff = x.reshape(n, 1, d) - x.reshape(1, n, d)
    return sqrt((diff * diff).sum(axis=-1))
