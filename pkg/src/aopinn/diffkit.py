"""Small differentiation engine for PINN losses.

Two layers:

* :class:`Dual` carries a value and its derivative with respect to the
  scalar time input (forward mode). It works over floats or numpy arrays.
* :class:`Tape` records operations on :class:`Var` nodes. Every node holds a
  Dual pair ``(value, deriv)``, and each primitive has hand-written adjoints
  for both halves, so reverse mode differentiates the dual arithmetic itself.
  Losses containing d/dt of network outputs (via :func:`time_derivative`)
  therefore get exact parameter gradients, mixed d/dw d/dt terms included.

The primitive set is deliberately closed: affine maps, tanh, +, -, *, /,
square, plus the structural ops ``column``, ``sum``, ``mean`` and
``time_derivative``.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .errors import NumericFailure


class UnsupportedPrimitive(TypeError):
    pass


_UFUNCS = {}  # filled below, maps numpy ufuncs onto the supported primitives


def _zero_like(x):
    return np.zeros_like(x, dtype=float) if isinstance(x, np.ndarray) else 0.0


class Dual:
    """Value and first derivative with respect to time."""

    __slots__ = ("value", "deriv")

    def __init__(self, value, deriv=0.0):
        self.value = value
        self.deriv = deriv

    def __repr__(self):
        return f"Dual({self.value!r}, {self.deriv!r})"

    @staticmethod
    def _lift(x):
        return x if isinstance(x, Dual) else Dual(x, _zero_like(x))

    def __add__(self, other):
        other = Dual._lift(other)
        return Dual(self.value + other.value, self.deriv + other.deriv)

    __radd__ = __add__

    def __sub__(self, other):
        other = Dual._lift(other)
        return Dual(self.value - other.value, self.deriv - other.deriv)

    def __rsub__(self, other):
        return Dual._lift(other) - self

    def __neg__(self):
        return Dual(-self.value, -self.deriv)

    def __mul__(self, other):
        other = Dual._lift(other)
        return Dual(
            self.value * other.value,
            self.deriv * other.value + self.value * other.deriv,
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = Dual._lift(other)
        v = self.value / other.value
        return Dual(v, (self.deriv - v * other.deriv) / other.value)

    def __rtruediv__(self, other):
        return Dual._lift(other) / self

    def __pow__(self, k):
        if k != 2:
            raise UnsupportedPrimitive("only squaring is supported")
        return square(self)

    def __array_ufunc__(self, ufunc, method, *inputs, **kwargs):
        if method != "__call__" or kwargs or ufunc not in _UFUNCS:
            raise UnsupportedPrimitive(f"{ufunc.__name__} is not a supported primitive")
        return _UFUNCS[ufunc](*inputs)

    def __getattr__(self, name):
        # numpy falls back to methods like x.sin() on object arrays
        if name.startswith("__"):
            raise AttributeError(name)
        raise UnsupportedPrimitive(f"{name} is not a supported primitive")


def tanh(x):
    if isinstance(x, Var):
        return x._tape._tanh(x)
    if isinstance(x, Dual):
        y = np.tanh(x.value)
        return Dual(y, (1.0 - y * y) * x.deriv)
    return np.tanh(x)


def square(x):
    if isinstance(x, Var):
        return x._tape._square(x)
    if isinstance(x, Dual):
        return Dual(x.value * x.value, 2.0 * x.value * x.deriv)
    return x * x


def affine(x, weight, bias):
    """Row-wise ``x @ weight + bias``; weight and bias do not depend on time."""
    if isinstance(x, Var) or isinstance(weight, Var):
        tape = x._tape if isinstance(x, Var) else weight._tape
        return tape._affine(x, weight, bias)
    if isinstance(weight, Dual) or isinstance(bias, Dual):
        raise UnsupportedPrimitive("affine weights must be time independent")
    if isinstance(x, Dual):
        return Dual(x.value @ weight + bias, x.deriv @ weight)
    return x @ weight + bias


_UFUNCS.update(
    {
        np.add: lambda a, b: Dual._lift(a) + b,
        np.subtract: lambda a, b: Dual._lift(a) - b,
        np.multiply: lambda a, b: Dual._lift(a) * b,
        np.true_divide: lambda a, b: Dual._lift(a) / b,
        np.negative: lambda a: -a,
        np.tanh: tanh,
        np.square: square,
    }
)


def forward_with_time_derivative(fn: Callable, t):
    """Evaluate ``fn`` on a time input seeded with derivative one.

    Returns ``(value, deriv)`` for a single output, or a list of such pairs
    when ``fn`` returns a sequence.
    """
    t = np.asarray(t, dtype=float) if np.ndim(t) else float(t)
    out = fn(Dual(t, np.ones_like(t) if isinstance(t, np.ndarray) else 1.0))
    if isinstance(out, Dual):
        return out.value, out.deriv
    return [(o.value, o.deriv) for o in out]


# -- reverse mode --------------------------------------------------------------


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


class Var:
    """Tape node: a Dual pair plus adjoint slots for both halves.

    ``deriv is None`` means the quantity does not depend on time.
    """

    __slots__ = ("_tape", "value", "deriv", "_backward", "grad", "grad_deriv", "t_tracked")

    def __init__(self, tape, value, deriv=None, backward=None, t_tracked=True):
        self._tape = tape
        self.value = value
        self.deriv = deriv
        self._backward = backward
        self.grad = None
        self.grad_deriv = None
        self.t_tracked = t_tracked

    @property
    def shape(self):
        return np.shape(self.value)

    def __add__(self, other):
        return self._tape._add(self, other)

    def __radd__(self, other):
        return self._tape._add(other, self)

    def __sub__(self, other):
        return self._tape._sub(self, other)

    def __rsub__(self, other):
        return self._tape._sub(other, self)

    def __neg__(self):
        return self._tape._mul(self, -1.0)

    def __mul__(self, other):
        return self._tape._mul(self, other)

    def __rmul__(self, other):
        return self._tape._mul(other, self)

    def __truediv__(self, other):
        return self._tape._div(self, other)

    def __rtruediv__(self, other):
        return self._tape._div(other, self)

    def __pow__(self, k):
        if k != 2:
            raise UnsupportedPrimitive("only squaring is supported")
        return self._tape._square(self)

    __array_ufunc__ = None

    def __repr__(self):
        return f"Var(shape={self.shape})"


def _acc(node, g, gd):
    if g is not None:
        g = _unbroadcast(np.asarray(g, dtype=float), np.shape(node.value))
        node.grad = g if node.grad is None else node.grad + g
    if gd is not None and node.t_tracked:
        gd = _unbroadcast(np.asarray(gd, dtype=float), np.shape(node.value))
        node.grad_deriv = gd if node.grad_deriv is None else node.grad_deriv + gd


def _d(x):
    return x.deriv if isinstance(x, Var) else None


def _mul_opt(a, b):
    if a is None or b is None:
        return None
    return a * b


def _add_opt(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return a + b


class Tape:
    """Records primitives in creation order; :meth:`backward` replays them in
    reverse, which is a fixed topological order."""

    def __init__(self):
        self.nodes: list = []

    def _node(self, value, deriv, backward, parents):
        tracked = all(p.t_tracked for p in parents if isinstance(p, Var))
        v = Var(self, value, deriv, backward, tracked)
        self.nodes.append(v)
        return v

    def variable(self, value) -> Var:
        """Trainable leaf (time independent)."""
        v = Var(self, np.array(value, dtype=float))
        self.nodes.append(v)
        return v

    def dual_input(self, value, deriv) -> Var:
        """Non-trainable leaf carrying a time derivative (e.g. the input t)."""
        v = Var(self, np.asarray(value, dtype=float), np.asarray(deriv, dtype=float))
        self.nodes.append(v)
        return v

    def _const(self, x):
        return x.value if isinstance(x, Var) else np.asarray(x, dtype=float)

    def _add(self, a, b, sign=1.0):
        av, bv = self._const(a), self._const(b)
        ad, bd = _d(a), _d(b)
        value = av + sign * bv
        deriv = _add_opt(ad, None if bd is None else sign * bd)

        def backward(g, gd):
            if isinstance(a, Var):
                _acc(a, g, gd)
            if isinstance(b, Var):
                _acc(b, sign * g, None if gd is None else sign * gd)

        return self._node(value, deriv, backward, (a, b))

    def _sub(self, a, b):
        return self._add(a, b, -1.0)

    def _mul(self, a, b):
        av, bv = self._const(a), self._const(b)
        ad, bd = _d(a), _d(b)
        value = av * bv
        deriv = _add_opt(_mul_opt(ad, bv), _mul_opt(av, bd))

        def backward(g, gd):
            if isinstance(a, Var):
                _acc(a, _add_opt(g * bv, _mul_opt(gd, bd)), _mul_opt(gd, bv))
            if isinstance(b, Var):
                _acc(b, _add_opt(g * av, _mul_opt(gd, ad)), _mul_opt(gd, av))

        return self._node(value, deriv, backward, (a, b))

    def _div(self, a, b):
        av, bv = self._const(a), self._const(b)
        ad, bd = _d(a), _d(b)
        value = av / bv
        inv = 1.0 / bv
        # deriv = a'/b - a b'/b^2
        deriv = _add_opt(_mul_opt(ad, inv), _mul_opt(bd, -value * inv))

        def backward(g, gd):
            if isinstance(a, Var):
                ga = g * inv
                if gd is not None and bd is not None:
                    ga = ga - gd * bd * inv * inv
                _acc(a, ga, _mul_opt(gd, inv))
            if isinstance(b, Var):
                gb = -g * value * inv
                if gd is not None:
                    if ad is not None:
                        gb = gb - gd * ad * inv * inv
                    if bd is not None:
                        gb = gb + 2.0 * gd * bd * value * inv * inv
                _acc(b, gb, _mul_opt(gd, -value * inv))

        return self._node(value, deriv, backward, (a, b))

    def _tanh(self, a):
        y = np.tanh(a.value)
        dy = 1.0 - y * y
        deriv = _mul_opt(a.deriv, dy)

        def backward(g, gd):
            ga = g * dy
            if gd is not None and a.deriv is not None:
                ga = ga - 2.0 * gd * y * dy * a.deriv
            _acc(a, ga, _mul_opt(gd, dy))

        return self._node(y, deriv, backward, (a,))

    def _square(self, a):
        av, ad = a.value, a.deriv
        value = av * av
        deriv = None if ad is None else 2.0 * av * ad

        def backward(g, gd):
            ga = 2.0 * g * av
            if gd is not None and ad is not None:
                ga = ga + 2.0 * gd * ad
            _acc(a, ga, _mul_opt(gd, 2.0 * av))

        return self._node(value, deriv, backward, (a,))

    def _affine(self, x, w, b):
        if _d(w) is not None or _d(b) is not None:
            raise UnsupportedPrimitive("affine weights must be time independent")
        xv, wv, bv = self._const(x), self._const(w), self._const(b)
        xd = _d(x)
        value = xv @ wv + bv
        deriv = None if xd is None else xd @ wv

        def backward(g, gd):
            if isinstance(x, Var):
                _acc(x, g @ wv.T, None if gd is None else gd @ wv.T)
            if isinstance(w, Var):
                gw = xv.T @ g
                if gd is not None and xd is not None:
                    gw = gw + xd.T @ gd
                _acc(w, gw, None)
            if isinstance(b, Var):
                _acc(b, g.sum(axis=0), None)

        return self._node(value, deriv, backward, (x, w, b))

    def column(self, a: Var, j: int) -> Var:
        value = a.value[:, j]
        deriv = None if a.deriv is None else a.deriv[:, j]

        def backward(g, gd):
            full = np.zeros_like(a.value)
            full[:, j] = g
            fulld = None
            if gd is not None:
                fulld = np.zeros_like(a.value)
                fulld[:, j] = gd
            _acc(a, full, fulld)

        return self._node(value, deriv, backward, (a,))

    def sum(self, a: Var) -> Var:
        value = np.sum(a.value)
        deriv = None if a.deriv is None else np.sum(a.deriv)
        shape = np.shape(a.value)

        def backward(g, gd):
            _acc(
                a,
                np.broadcast_to(g, shape),
                None if gd is None else np.broadcast_to(gd, shape),
            )

        return self._node(value, deriv, backward, (a,))

    def mean(self, a: Var) -> Var:
        return self._mul(self.sum(a), 1.0 / max(np.size(a.value), 1))

    def time_derivative(self, a: Var) -> Var:
        """Promote the time derivative of ``a`` to a value of its own. Its own
        time derivative is not tracked (one nesting level only)."""
        if not a.t_tracked:
            raise UnsupportedPrimitive("nested time derivatives are not supported")
        deriv = a.deriv if a.deriv is not None else np.zeros_like(a.value)

        def backward(g, gd):
            _acc(a, None, g)

        v = Var(self, deriv, None, backward, t_tracked=False)
        self.nodes.append(v)
        return v

    def backward(self, out: Var) -> None:
        if np.ndim(out.value) != 0:
            raise ValueError("backward needs a scalar output")
        for node in self.nodes:
            if not np.all(np.isfinite(node.value)) or (
                node.deriv is not None and not np.all(np.isfinite(node.deriv))
            ):
                raise NumericFailure("non-finite value in forward pass")
        for node in self.nodes:
            node.grad = node.grad_deriv = None
        out.grad = np.array(1.0)
        for node in reversed(self.nodes):
            if node._backward is None or (node.grad is None and node.grad_deriv is None):
                continue
            g = node.grad if node.grad is not None else np.zeros_like(node.value)
            node._backward(g, node.grad_deriv)


def value_and_gradient(loss_fn: Callable, params: Sequence[np.ndarray]):
    """Evaluate ``loss_fn(tape, *vars)`` and return ``(loss, [dloss/dparam])``.

    Every parameter gets a gradient array of its own shape; parameters the
    loss does not reach get exact zeros.
    """
    tape = Tape()
    leaves = [tape.variable(p) for p in params]
    out = loss_fn(tape, *leaves)
    tape.backward(out)
    grads = [
        np.zeros_like(leaf.value) if leaf.grad is None else np.array(leaf.grad, dtype=float)
        for leaf in leaves
    ]
    return float(out.value), grads


def gradient(loss_fn: Callable, params):
    """Gradient of a scalar loss. ``params`` is one flat vector or a sequence
    of arrays; the result mirrors it."""
    if isinstance(params, np.ndarray):
        return value_and_gradient(loss_fn, [params])[1][0]
    return value_and_gradient(loss_fn, params)[1]


def flatten(arrays: Sequence[np.ndarray]) -> np.ndarray:
    return np.concatenate([np.ravel(a) for a in arrays]) if arrays else np.zeros(0)


def unflatten(flat: np.ndarray, shapes: Sequence[tuple]) -> list:
    out, k = [], 0
    for shape in shapes:
        n = int(np.prod(shape, dtype=int))
        out.append(np.asarray(flat[k : k + n], dtype=float).reshape(shape))
        k += n
    if k != len(flat):
        raise ValueError(f"flat vector has {len(flat)} entries, shapes need {k}")
    return out


def check_finite(x, what: str = "value") -> None:
    if not np.all(np.isfinite(x)):
        raise NumericFailure(f"non-finite {what}")

