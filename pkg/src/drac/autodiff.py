"""Reverse-mode automatic differentiation over dense float64 arrays.

Operations evaluate eagerly on numpy storage and record their history so
that :func:`gradients` can replay the chain rule backwards. The primitive
set is deliberately small: exactly what MLP actors/critics and the
training losses need. No broadcasting is performed except the bias
addition inside :func:`affine`.

Conventions:
  * relu has subgradient 0 at 0.
  * log floors its input at 1e-12 (second safety net under the distance
    floor applied by callers); negative input is a domain error.
  * clip passes gradients through strictly inside the interval and zeroes
    them outside.
  * A graph is confined to one thread; the no-grad flag is thread-local.
"""

from __future__ import annotations

import threading
from typing import Callable, Sequence

import numpy as np

LOG_FLOOR = 1e-12

_state = threading.local()


class AutodiffError(Exception):
    """Base class for errors raised by this module."""


class ShapeMismatch(AutodiffError):
    def __init__(self, op: str, shape_a, shape_b):
        super().__init__(f"{op}: incompatible shapes {tuple(shape_a)} and {tuple(shape_b)}")
        self.op = op
        self.shape_a = tuple(shape_a)
        self.shape_b = tuple(shape_b)


class DomainError(AutodiffError):
    pass


def _recording() -> bool:
    return not getattr(_state, "no_grad", False)


class no_grad:
    """Context manager that suppresses history recording (stop-gradient region)."""

    def __enter__(self):
        self._prev = getattr(_state, "no_grad", False)
        _state.no_grad = True
        return self

    def __exit__(self, *exc):
        _state.no_grad = self._prev
        return False


class Array:
    """A dense float64 tensor with an optional record of how it was produced."""

    __slots__ = ("data", "requires_grad", "_op", "_parents", "_vjp")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self._op = None
        self._parents = ()
        self._vjp = None

    @classmethod
    def _result(cls, data: np.ndarray, op: str, parents: tuple, vjp) -> "Array":
        out = cls.__new__(cls)
        out.data = data
        out.requires_grad = False
        if _recording() and any(p._tracked for p in parents):
            out._op = op
            out._parents = parents
            out._vjp = vjp
        else:
            out._op = None
            out._parents = ()
            out._vjp = None
        return out

    @property
    def _tracked(self) -> bool:
        return self.requires_grad or self._vjp is not None

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise AutodiffError(f"item() on non-scalar array of shape {self.shape}")
        return float(self.data.reshape(()))

    def __repr__(self) -> str:
        tag = self._op or ("param" if self.requires_grad else "const")
        return f"Array(shape={self.shape}, {tag})"

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        if isinstance(other, Array):
            return mul(self, other)
        return scale(self, float(other))

    def __rmul__(self, other):
        return scale(self, float(other))

    def __neg__(self):
        return scale(self, -1.0)


def _as_array(x) -> Array:
    return x if isinstance(x, Array) else Array(x)


def stop_gradient(x: Array) -> Array:
    """Same forward value, no history: upstream gradients become zero."""
    return Array(x.data)


# ---------------------------------------------------------------------------
# primitives


def affine(weight: Array, bias: Array, x: Array) -> Array:
    """weight @ x + bias for 1-D x, or x @ weight.T + bias row-wise for 2-D x."""
    w, b = _as_array(weight), _as_array(bias)
    x = _as_array(x)
    if w.data.ndim != 2 or b.data.ndim != 1 or b.data.shape[0] != w.data.shape[0]:
        raise ShapeMismatch("affine", w.shape, b.shape)
    if x.data.ndim not in (1, 2) or x.data.shape[-1] != w.data.shape[1]:
        raise ShapeMismatch("affine", w.shape, x.shape)
    if x.data.ndim == 1:
        out = w.data @ x.data + b.data

        def vjp(g):
            gw = np.outer(g, x.data) if w._tracked else None
            gb = g if b._tracked else None
            gx = g @ w.data if x._tracked else None
            return gw, gb, gx

    else:
        out = x.data @ w.data.T + b.data

        def vjp(g):
            gw = g.T @ x.data if w._tracked else None
            gb = g.sum(axis=0) if b._tracked else None
            gx = g @ w.data if x._tracked else None
            return gw, gb, gx

    return Array._result(out, "affine", (w, b, x), vjp)


def _unary(op: str, x, out: np.ndarray, dfn) -> Array:
    x = _as_array(x)

    def vjp(g):
        return (dfn(g),)

    return Array._result(out, op, (x,), vjp)


def relu(x) -> Array:
    x = _as_array(x)
    mask = x.data > 0
    return _unary("relu", x, np.maximum(x.data, 0.0), lambda g: g * mask)


def tanh(x) -> Array:
    x = _as_array(x)
    out = np.tanh(x.data)
    return _unary("tanh", x, out, lambda g: g * (1.0 - out * out))


def exp(x) -> Array:
    x = _as_array(x)
    out = np.exp(x.data)
    return _unary("exp", x, out, lambda g: g * out)


def log(x) -> Array:
    x = _as_array(x)
    if np.any(x.data < 0):
        raise DomainError("log of negative input")
    floored = np.maximum(x.data, LOG_FLOOR)
    return _unary(
        "log", x, np.log(floored),
        lambda g: np.where(x.data >= LOG_FLOOR, g / floored, 0.0),
    )


def square(x) -> Array:
    x = _as_array(x)
    return _unary("square", x, x.data * x.data, lambda g: g * (2.0 * x.data))


def sqrt(x) -> Array:
    x = _as_array(x)
    if np.any(x.data < 0):
        raise DomainError("sqrt of negative input")
    out = np.sqrt(x.data)
    return _unary("sqrt", x, out, lambda g: g / (2.0 * out))


def _binary(op: str, a, b) -> tuple[Array, Array]:
    a, b = _as_array(a), _as_array(b)
    if a.data.shape != b.data.shape:
        raise ShapeMismatch(op, a.shape, b.shape)
    return a, b


def add(a, b) -> Array:
    a, b = _binary("add", a, b)

    def vjp(g):
        return (g if a._tracked else None, g if b._tracked else None)

    return Array._result(a.data + b.data, "add", (a, b), vjp)


def sub(a, b) -> Array:
    a, b = _binary("sub", a, b)

    def vjp(g):
        return (g if a._tracked else None, -g if b._tracked else None)

    return Array._result(a.data - b.data, "sub", (a, b), vjp)


def mul(a, b) -> Array:
    a, b = _binary("mul", a, b)

    def vjp(g):
        ga = g * b.data if a._tracked else None
        gb = g * a.data if b._tracked else None
        return ga, gb

    return Array._result(a.data * b.data, "mul", (a, b), vjp)


def scale(x, c: float) -> Array:
    x = _as_array(x)
    c = float(c)
    return _unary("scale", x, x.data * c, lambda g: g * c)


def minimum(a, b) -> Array:
    """Elementwise minimum; on ties the gradient is routed to the first operand."""
    a, b = _binary("minimum", a, b)
    take_a = a.data <= b.data

    def vjp(g):
        ga = g * take_a if a._tracked else None
        gb = g * ~take_a if b._tracked else None
        return ga, gb

    return Array._result(np.where(take_a, a.data, b.data), "minimum", (a, b), vjp)


def maximum(a, b) -> Array:
    """Elementwise maximum; on ties the gradient is routed to the first operand."""
    a, b = _binary("maximum", a, b)
    take_a = a.data >= b.data

    def vjp(g):
        ga = g * take_a if a._tracked else None
        gb = g * ~take_a if b._tracked else None
        return ga, gb

    return Array._result(np.where(take_a, a.data, b.data), "maximum", (a, b), vjp)


def clip(x, lo: float, hi: float) -> Array:
    x = _as_array(x)
    inside = (x.data > lo) & (x.data < hi)
    return _unary("clip", x, np.clip(x.data, lo, hi), lambda g: g * inside)


def concat(*arrays) -> Array:
    """Concatenate along the feature (last) axis."""
    arrs = tuple(_as_array(a) for a in arrays)
    if not arrs:
        raise AutodiffError("concat of no arrays")
    ndim = arrs[0].data.ndim
    for a in arrs[1:]:
        if a.data.ndim != ndim or a.data.shape[:-1] != arrs[0].data.shape[:-1]:
            raise ShapeMismatch("concat", arrs[0].shape, a.shape)
    widths = [a.data.shape[-1] for a in arrs]
    offsets = np.cumsum([0] + widths)

    def vjp(g):
        return tuple(
            g[..., offsets[i] : offsets[i + 1]] if a._tracked else None
            for i, a in enumerate(arrs)
        )

    return Array._result(np.concatenate([a.data for a in arrs], axis=-1), "concat", arrs, vjp)


def slice_features(x, start: int, stop: int) -> Array:
    """Contiguous slice along the feature (last) axis."""
    x = _as_array(x)
    if not (0 <= start <= stop <= x.data.shape[-1]):
        raise AutodiffError(f"slice_features: [{start}:{stop}] out of range for shape {x.shape}")

    def dfn(g):
        gx = np.zeros_like(x.data)
        gx[..., start:stop] = g
        return gx

    return _unary("slice_features", x, x.data[..., start:stop].copy(), dfn)


def slice_rows(x, start: int, stop: int) -> Array:
    """Contiguous slice along the leading (batch) axis of a 2-D array."""
    x = _as_array(x)
    if x.data.ndim != 2 or not (0 <= start <= stop <= x.data.shape[0]):
        raise AutodiffError(f"slice_rows: [{start}:{stop}] invalid for shape {x.shape}")

    def dfn(g):
        gx = np.zeros_like(x.data)
        gx[start:stop] = g
        return gx

    return _unary("slice_rows", x, x.data[start:stop].copy(), dfn)


def total_sum(x) -> Array:
    x = _as_array(x)
    return _unary("sum", x, np.asarray(np.sum(x.data)), lambda g: np.broadcast_to(g, x.data.shape))


def mean(x) -> Array:
    x = _as_array(x)
    n = x.data.size
    return _unary("mean", x, np.asarray(np.mean(x.data)), lambda g: np.broadcast_to(g / n, x.data.shape))


def l2norm(x) -> Array:
    """L2 norm along the feature axis: (F,) -> scalar, (B, F) -> (B,).

    At the origin the true gradient is undefined; the subgradient 0 is used
    so a floored distance never injects NaNs.
    """
    x = _as_array(x)
    out = np.sqrt(np.sum(x.data * x.data, axis=-1))

    def dfn(g):
        denom = np.where(out == 0.0, 1.0, out)
        return (g / denom)[..., None] * x.data

    return _unary("l2norm", x, np.asarray(out), dfn)


# ---------------------------------------------------------------------------
# backward pass


def gradients(target: Array, params: Sequence[Array]) -> dict:
    """Reverse-mode gradients of a scalar target for the requested parameters.

    Returns a map keyed by parameter object identity; an Array of the same
    shape per entry. A parameter that never entered the target's recorded
    history is an error, never a silent zero.
    """
    if not isinstance(target, Array):
        raise AutodiffError("gradients: target must be an Array")
    if target.data.size != 1:
        raise AutodiffError(f"gradients: target must be scalar, got shape {target.shape}")

    # Topological order over tracked nodes, iterative to survive deep graphs.
    topo: list[Array] = []
    seen: set[int] = set()
    stack: list[tuple[Array, bool]] = [(target, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p._tracked and id(p) not in seen:
                stack.append((p, False))

    grads: dict[int, np.ndarray] = {id(target): np.ones_like(target.data)}
    for node in reversed(topo):
        g = grads.pop(id(node), None)
        if g is None or node._vjp is None:
            if node.requires_grad and g is not None:
                grads[id(node)] = g  # leaf parameter: keep its accumulated gradient
            continue
        if node.requires_grad:
            grads[id(node)] = g  # a parameter that is also an interior node
        parts = node._vjp(g)
        for parent, pg in zip(node._parents, parts):
            if pg is None:
                continue
            acc = grads.get(id(parent))
            grads[id(parent)] = pg if acc is None else acc + pg

    result: dict[Array, Array] = {}
    for i, p in enumerate(params):
        g = grads.get(id(p))
        if g is None:
            raise AutodiffError(
                f"gradients: parameter {i} (shape {p.shape}) does not participate in the target's history"
            )
        result[p] = Array(np.asarray(g, dtype=np.float64).reshape(p.data.shape))
    return result


def finite_difference_check(fn: Callable[[], Array], params: Sequence[Array], step: float = 1e-5) -> float:
    """Max relative disagreement between analytic and central-difference gradients.

    ``fn`` rebuilds and returns the scalar expression; it must close over
    ``params``, whose data is perturbed in place (and restored). The caller
    keeps the expression smooth at the binding point.
    """
    analytic = gradients(fn(), params) if params else {}
    worst = 0.0
    for p in params:
        g = analytic[p].data.ravel()
        flat = p.data.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            f_plus = fn().item()
            flat[i] = orig - step
            f_minus = fn().item()
            flat[i] = orig
            central = (f_plus - f_minus) / (2.0 * step)
            rel = abs(g[i] - central) / (abs(central) + 1e-8)
            if rel > worst:
                worst = rel
    return worst
