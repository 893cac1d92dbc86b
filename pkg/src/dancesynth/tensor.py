"""Minimal dense tensor with reverse-mode gradients, float64 throughout.

Every primitive carries a hand-derived vector-Jacobian product; composites
are built by chaining primitives.  There is no graph compiler, no fusion,
no mixed precision: the point is that every gradient in the project can be
checked against central finite differences.
"""

from __future__ import annotations

import struct
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "Tensor",
    "ParamStore",
    "no_grad",
    "grad_enabled",
    "tensor",
    "zeros",
    "concat",
    "stack",
    "grad_check",
    "GradCheckError",
    "DimensionError",
    "ConfigurationError",
]


class DimensionError(ValueError):
    """Shapes do not line up for the requested operation."""


class ConfigurationError(ValueError):
    """A structural precondition (layer spec, kernel size, ...) is violated."""


_GRAD_ENABLED = True


class no_grad:
    """Context manager disabling tape construction (forward-only evaluation)."""

    def __enter__(self):
        global _GRAD_ENABLED
        self._prev = _GRAD_ENABLED
        _GRAD_ENABLED = False
        return self

    def __exit__(self, *exc):
        global _GRAD_ENABLED
        _GRAD_ENABLED = self._prev
        return False


def grad_enabled() -> bool:
    return _GRAD_ENABLED


def _as_array(x) -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    return a


class Tensor:
    """A float64 ndarray plus an optional backward closure."""

    __slots__ = ("data", "grad", "requires_grad", "_backward", "_parents")

    def __init__(self, data, requires_grad: bool = False,
                 parents: tuple = (), backward: Callable | None = None):
        self.data = _as_array(data)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad) and _GRAD_ENABLED
        self._parents = parents if _GRAD_ENABLED else ()
        self._backward = backward if _GRAD_ENABLED else None

    # -- basic protocol ----------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, grad={self.requires_grad})"

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    # -- autodiff ----------------------------------------------------------

    def _needs_tape(self) -> bool:
        return self.requires_grad or self._backward is not None

    def backward(self, seed: np.ndarray | None = None) -> None:
        """Reverse-mode sweep from this (typically scalar) node."""
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack = [self]
        # iterative DFS; recursion depth would blow up on long scans
        while stack:
            node = stack.pop()
            if id(node) in seen:
                continue
            pending = [p for p in node._parents if id(p) not in seen]
            if pending:
                stack.append(node)
                stack.extend(pending)
            else:
                seen.add(id(node))
                topo.append(node)
        if seed is None:
            if self.data.size != 1:
                raise DimensionError("backward() without seed needs a scalar output")
            seed = np.ones_like(self.data)
        grads: dict[int, np.ndarray] = {id(self): _as_array(seed)}
        for node in reversed(topo):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node.requires_grad:
                if node.grad is None:
                    node.grad = np.zeros_like(node.data)
                node.grad += g
            if node._backward is None:
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg

    def zero_grad(self) -> None:
        self.grad = None

    # -- operators ----------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, mul(_wrap(other), -1.0))

    def __rsub__(self, other):
        return add(_wrap(other), mul(self, -1.0))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _wrap(other)
        return mul(self, power(other, -1.0))

    def __rtruediv__(self, other):
        return mul(_wrap(other), power(self, -1.0))

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, p):
        return power(self, p)

    def __getitem__(self, idx):
        return take(self, idx)

    def sum(self, axis=None, keepdims=False):
        return reduce_sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return reduce_mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def swapaxes(self, a, b):
        return swapaxes(self, a, b)


def tensor(data, requires_grad: bool = False) -> Tensor:
    return Tensor(data, requires_grad=requires_grad)


def zeros(shape, requires_grad: bool = False) -> Tensor:
    return Tensor(np.zeros(shape), requires_grad=requires_grad)


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum grad down to `shape` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _make(data: np.ndarray, parents: tuple, backward: Callable) -> Tensor:
    if _GRAD_ENABLED and any(p._needs_tape() for p in parents):
        return Tensor(data, parents=parents, backward=backward)
    return Tensor(data)


# -- elementwise primitives ---------------------------------------------------


def add(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    out = a.data + b.data

    def bw(g):
        return (_unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape))

    return _make(out, (a, b), bw)


def mul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    out = a.data * b.data

    def bw(g):
        return (_unbroadcast(g * b.data, a.data.shape),
                _unbroadcast(g * a.data, b.data.shape))

    return _make(out, (a, b), bw)


def power(a, p: float) -> Tensor:
    a = _wrap(a)
    out = a.data ** p

    def bw(g):
        return (g * p * a.data ** (p - 1.0),)

    return _make(out, (a,), bw)


def exp(a) -> Tensor:
    a = _wrap(a)
    out = np.exp(a.data)

    def bw(g):
        return (g * out,)

    return _make(out, (a,), bw)


def log(a) -> Tensor:
    a = _wrap(a)
    out = np.log(a.data)

    def bw(g):
        return (g / a.data,)

    return _make(out, (a,), bw)


def sqrt(a) -> Tensor:
    a = _wrap(a)
    out = np.sqrt(a.data)

    def bw(g):
        return (g * 0.5 / out,)

    return _make(out, (a,), bw)


def tanh(a) -> Tensor:
    a = _wrap(a)
    out = np.tanh(a.data)

    def bw(g):
        return (g * (1.0 - out * out),)

    return _make(out, (a,), bw)


def sigmoid(a) -> Tensor:
    a = _wrap(a)
    out = 0.5 * (np.tanh(0.5 * a.data) + 1.0)  # stable for large |x|

    def bw(g):
        return (g * out * (1.0 - out),)

    return _make(out, (a,), bw)


def silu(a) -> Tensor:
    """x * sigmoid(x), the default gate nonlinearity."""
    a = _wrap(a)
    s = 0.5 * (np.tanh(0.5 * a.data) + 1.0)
    out = a.data * s

    def bw(g):
        return (g * (s + a.data * s * (1.0 - s)),)

    return _make(out, (a,), bw)


def softplus(a) -> Tensor:
    a = _wrap(a)
    out = np.logaddexp(0.0, a.data)

    def bw(g):
        return (g * 0.5 * (np.tanh(0.5 * a.data) + 1.0),)

    return _make(out, (a,), bw)


def absolute(a) -> Tensor:
    a = _wrap(a)
    out = np.abs(a.data)

    def bw(g):
        return (g * np.sign(a.data),)

    return _make(out, (a,), bw)


def relu(a) -> Tensor:
    a = _wrap(a)
    out = np.maximum(a.data, 0.0)

    def bw(g):
        return (g * (a.data > 0.0),)

    return _make(out, (a,), bw)


# -- reductions and shape ops -------------------------------------------------


def reduce_sum(a, axis=None, keepdims=False) -> Tensor:
    a = _wrap(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def bw(g):
        g = np.asarray(g)
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.data.shape).copy(),)

    return _make(out, (a,), bw)


def reduce_mean(a, axis=None, keepdims=False) -> Tensor:
    a = _wrap(a)
    out = a.data.mean(axis=axis, keepdims=keepdims)
    n = a.data.size if axis is None else a.data.shape[axis]

    def bw(g):
        g = np.asarray(g)
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.data.shape) / n,)

    return _make(out, (a,), bw)


def reshape(a, shape) -> Tensor:
    a = _wrap(a)
    out = a.data.reshape(shape)
    src = a.data.shape

    def bw(g):
        return (g.reshape(src),)

    return _make(out, (a,), bw)


def swapaxes(a, ax1: int, ax2: int) -> Tensor:
    a = _wrap(a)
    out = np.swapaxes(a.data, ax1, ax2)

    def bw(g):
        return (np.swapaxes(g, ax1, ax2),)

    return _make(out, (a,), bw)


def take(a, idx) -> Tensor:
    """numpy basic/advanced indexing with scatter-add backward."""
    a = _wrap(a)
    out = a.data[idx]

    def bw(g):
        ga = np.zeros_like(a.data)
        np.add.at(ga, idx, g)
        return (ga,)

    return _make(np.array(out, copy=True), (a,), bw)


def permute_axis(a, perm: np.ndarray, axis: int) -> Tensor:
    """Reorder entries along one axis by a permutation (bijection)."""
    a = _wrap(a)
    perm = np.asarray(perm, dtype=np.intp)
    out = np.take(a.data, perm, axis=axis)
    inv = np.empty_like(perm)
    inv[perm] = np.arange(perm.size)

    def bw(g):
        return (np.take(g, inv, axis=axis),)

    return _make(out, (a,), bw)


def concat(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    parts = [_wrap(p) for p in parts]
    out = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.data.shape[axis] for p in parts]
    bounds = np.cumsum([0] + sizes)

    def bw(g):
        grads = []
        for i in range(len(parts)):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(bounds[i], bounds[i + 1])
            grads.append(g[tuple(sl)])
        return tuple(grads)

    return _make(out, tuple(parts), bw)


def stack(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    parts = [_wrap(p) for p in parts]
    out = np.stack([p.data for p in parts], axis=axis)

    def bw(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(parts)))

    return _make(out, tuple(parts), bw)


def matmul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    if a.data.ndim == 0 or b.data.ndim == 0:
        raise DimensionError("matmul needs at least 1-d operands")
    try:
        out = a.data @ b.data
    except ValueError as exc:
        raise DimensionError(f"matmul: {exc}") from exc

    def bw(g):
        ad, bd = a.data, b.data
        if ad.ndim == 1 and bd.ndim == 1:
            return (g * bd, g * ad)
        if ad.ndim == 1:
            ga = (np.expand_dims(g, -2) @ np.swapaxes(bd, -1, -2)).squeeze(-2)
            gb = np.expand_dims(ad, -1) @ np.expand_dims(g, -2)
            return (_unbroadcast(ga, ad.shape), _unbroadcast(gb, bd.shape))
        if bd.ndim == 1:
            ga = np.expand_dims(g, -1) @ np.expand_dims(bd, -2)
            gb = np.swapaxes(ad, -1, -2) @ np.expand_dims(g, -1)
            return (_unbroadcast(ga, ad.shape), _unbroadcast(gb.squeeze(-1), bd.shape))
        ga = g @ np.swapaxes(bd, -1, -2)
        gb = np.swapaxes(ad, -1, -2) @ g
        return (_unbroadcast(ga, ad.shape), _unbroadcast(gb, bd.shape))

    return _make(out, (a, b), bw)


# -- parameter store ----------------------------------------------------------


class ParamStore:
    """Named parameter tensors with accumulated gradients.

    Single writer: gradient accumulation and updates must come from one
    thread; reads of a snapshot are safe anywhere.
    """

    MAGIC = b"DSCK"
    VERSION = 1

    def __init__(self):
        self._params: dict[str, Tensor] = {}

    def add(self, name: str, value: np.ndarray) -> Tensor:
        if name in self._params:
            raise ConfigurationError(f"duplicate parameter name: {name}")
        t = Tensor(np.array(value, dtype=np.float64), requires_grad=True)
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def items(self):
        return self._params.items()

    def tensors(self) -> list[Tensor]:
        return list(self._params.values())

    def num_scalars(self) -> int:
        return sum(t.data.size for t in self._params.values())

    def zero_grad(self) -> None:
        for t in self._params.values():
            t.grad = None

    # checkpoint format: MAGIC, version byte, u32 record count, then per
    # record u16 name length, utf-8 name, u8 ndim, u32 dims, f64-le values
    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.MAGIC)
            fh.write(struct.pack("<B", self.VERSION))
            fh.write(struct.pack("<I", len(self._params)))
            for name, t in self._params.items():
                enc = name.encode("utf-8")
                fh.write(struct.pack("<H", len(enc)))
                fh.write(enc)
                fh.write(struct.pack("<B", t.data.ndim))
                for d in t.data.shape:
                    fh.write(struct.pack("<I", d))
                fh.write(t.data.astype("<f8").tobytes())

    @classmethod
    def load(cls, path) -> "ParamStore":
        store = cls()
        with open(path, "rb") as fh:
            if fh.read(4) != cls.MAGIC:
                raise ConfigurationError(f"{path}: not a parameter checkpoint")
            (version,) = struct.unpack("<B", fh.read(1))
            if version != cls.VERSION:
                raise ConfigurationError(f"{path}: unsupported checkpoint version {version}")
            (count,) = struct.unpack("<I", fh.read(4))
            for _ in range(count):
                (nlen,) = struct.unpack("<H", fh.read(2))
                name = fh.read(nlen).decode("utf-8")
                (ndim,) = struct.unpack("<B", fh.read(1))
                shape = tuple(struct.unpack("<I", fh.read(4))[0] for _ in range(ndim))
                n = int(np.prod(shape)) if shape else 1
                data = np.frombuffer(fh.read(8 * n), dtype="<f8").reshape(shape)
                store.add(name, data)
        return store

    def load_values(self, other: "ParamStore") -> None:
        """Copy values from another store with identical names/shapes."""
        if set(other.names()) != set(self.names()):
            raise ConfigurationError("checkpoint/config mismatch: parameter names differ")
        for name, t in self._params.items():
            src = other[name]
            if src.data.shape != t.data.shape:
                raise ConfigurationError(f"checkpoint/config mismatch for {name}")
            t.data = src.data.copy()


# -- gradient checking --------------------------------------------------------


class GradCheckError(RuntimeError):
    """Raised when a finite-difference check hits a non-finite value."""


def grad_check(fn: Callable[[], Tensor], params: Iterable[Tensor],
               eps: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    `fn` must rebuild the scalar loss from scratch on each call (it reads
    the current parameter values).  The error is measured per parameter
    tensor in the infinity norm, max |a - n| / max(||a||_inf, ||n||_inf,
    1e-12): dividing element-wise would amplify finite-difference roundoff
    (~|loss| * machine_eps / eps, absolute) on near-zero entries into
    spurious failures even when every meaningful gradient matches.
    """
    params = list(params)
    for p in params:
        p.grad = None
    loss = fn()
    if not np.isfinite(loss.data).all():
        raise GradCheckError("non-finite loss in forward pass")
    loss.backward()
    worst = 0.0
    for p in params:
        analytic = p.grad if p.grad is not None else np.zeros_like(p.data)
        flat = p.data.reshape(-1)
        an = analytic.reshape(-1)
        num = np.empty_like(an)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            hi = fn().item()
            flat[i] = orig - eps
            lo = fn().item()
            flat[i] = orig
            if not (np.isfinite(hi) and np.isfinite(lo)):
                raise GradCheckError(f"non-finite intermediate near parameter index {i}")
            num[i] = (hi - lo) / (2.0 * eps)
        scale = max(float(np.abs(an).max(initial=0.0)),
                    float(np.abs(num).max(initial=0.0)), 1e-12)
        worst = max(worst, float(np.abs(an - num).max(initial=0.0)) / scale)
    return worst
