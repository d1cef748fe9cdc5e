# pygeofuse/nn/tensor.py

"""
Dense float64 tensors with reverse-mode differentiation.

Every operation records a closure that maps the output gradient to the
gradients of its inputs; `backward` replays the closures in reverse
topological order. Storage is a row-major numpy float64 array; broadcasting
is limited to (matrix, row-vector) and (tensor, scalar) pairs.
"""

import os
import threading
import warnings
from contextlib import contextmanager
from typing import Callable, Dict, Iterable, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from ..errors import ContractError, DimensionError, GeoFuseWarning

_DEBUG = os.getenv("GEOFUSE_DEBUG") == "1"
_state = threading.local()

ArrayLike = Union["Tensor", np.ndarray, float, int, Sequence]


def is_grad_enabled() -> bool:
    return getattr(_state, "grad_enabled", True)


@contextmanager
def no_grad():
    """Disable graph recording on the current thread."""
    previous = is_grad_enabled()
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = previous


class Tensor:
    """
    A dense float64 array, optionally tracked for differentiation.

    Parameters
    ----------
    `data` : array-like
        Values; copied and converted to float64.
    `grad_enabled` : bool, optional
        Whether gradients are accumulated into `grad` by `backward`.
        - False (default)
    """

    def __init__(self, data: ArrayLike, grad_enabled: bool = False):
        if isinstance(data, Tensor):
            data = data.data
        self.data = np.array(data, dtype=np.float64)
        self.grad_enabled = bool(grad_enabled)
        self.grad: Optional[np.ndarray] = None
        self._parents: Tuple["Tensor", ...] = ()
        self._backward: Optional[Callable] = None
        self._op = "leaf"

    @staticmethod
    def _from_op(data: np.ndarray, parents: Tuple["Tensor", ...], backward: Callable, op: str) -> "Tensor":
        out = Tensor.__new__(Tensor)
        out.data = data
        out.grad = None
        out._op = op
        tracked = is_grad_enabled() and any(p.grad_enabled for p in parents)
        out.grad_enabled = tracked
        out._parents = parents if tracked else ()
        out._backward = backward if tracked else None
        if _DEBUG and all(np.all(np.isfinite(p.data)) for p in parents):
            assert np.all(np.isfinite(data)), f"{op} produced non-finite values from finite inputs"
        return out

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def T(self) -> "Tensor":
        return transpose(self)

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def _accumulate(self, grad: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += grad

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, op={self._op}, grad_enabled={self.grad_enabled})"

    def __add__(self, other: ArrayLike) -> "Tensor":
        return add(self, other)

    def __radd__(self, other: ArrayLike) -> "Tensor":
        return add(other, self)

    def __sub__(self, other: ArrayLike) -> "Tensor":
        return sub(self, other)

    def __rsub__(self, other: ArrayLike) -> "Tensor":
        return sub(other, self)

    def __mul__(self, other: ArrayLike) -> "Tensor":
        return mul(self, other)

    def __rmul__(self, other: ArrayLike) -> "Tensor":
        return mul(other, self)

    def __truediv__(self, other: ArrayLike) -> "Tensor":
        return div(self, other)

    def __neg__(self) -> "Tensor":
        return mul(self, -1.0)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)

    def __getitem__(self, key) -> "Tensor":
        return index(self, key)

    def sum(self, axis: Optional[int] = None, keepdims: bool = False) -> "Tensor":
        return tensor_sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis: Optional[int] = None, keepdims: bool = False) -> "Tensor":
        return tensor_mean(self, axis=axis, keepdims=keepdims)


class Parameter(Tensor):
    """
    A named, trainable tensor.

    A frozen Parameter keeps its value: it receives no gradient and the
    optimizer skips it.
    """

    def __init__(self, name: str, data: ArrayLike, frozen: bool = False):
        super().__init__(data, grad_enabled=not frozen)
        self.name = name
        self.frozen = frozen

    @property
    def tensor(self) -> "Parameter":
        return self

    def freeze(self, value: Optional[float] = None) -> None:
        if value is not None:
            self.data[...] = value
        self.frozen = True
        self.grad_enabled = False
        self.grad = None

    def __repr__(self) -> str:
        return f"Parameter(name={self.name!r}, shape={self.shape}, frozen={self.frozen})"


def as_tensor(value: ArrayLike) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _broadcast_shape(a: Tuple[int, ...], b: Tuple[int, ...], op: str) -> Tuple[int, ...]:
    if a == b:
        return a
    if b == () or a == ():
        return a if b == () else b
    if len(b) == 1 and len(a) >= 1 and a[-1] == b[0]:
        return a
    if len(a) == 1 and len(b) >= 1 and b[-1] == a[0]:
        return b
    raise DimensionError(f"{op}: shapes {a} and {b} are not compatible")


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    if shape == ():
        return np.array(grad.sum())
    return grad.reshape(-1, shape[-1]).sum(axis=0)


def add(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a.shape, b.shape, "add")

    def _backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return Tensor._from_op(a.data + b.data, (a, b), _backward, "add")


def sub(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a.shape, b.shape, "sub")

    def _backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return Tensor._from_op(a.data - b.data, (a, b), _backward, "sub")


def mul(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a.shape, b.shape, "mul")

    def _backward(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return Tensor._from_op(a.data * b.data, (a, b), _backward, "mul")


def div(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a.shape, b.shape, "div")

    def _backward(g):
        return (
            _unbroadcast(g / b.data, a.shape),
            _unbroadcast(-g * a.data / (b.data * b.data), b.shape),
        )

    return Tensor._from_op(a.data / b.data, (a, b), _backward, "div")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product of an m×k and a k×n tensor."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: cannot multiply shapes {a.shape} and {b.shape}")

    def _backward(g):
        return g @ b.data.T, a.data.T @ g

    return Tensor._from_op(a.data @ b.data, (a, b), _backward, "matmul")


def transpose(a: Tensor) -> Tensor:
    if a.ndim != 2:
        raise DimensionError(f"transpose: expected a matrix, got shape {a.shape}")

    def _backward(g):
        return (np.ascontiguousarray(g.T),)

    return Tensor._from_op(np.ascontiguousarray(a.data.T), (a,), _backward, "transpose")


def reshape(a: Tensor, shape: Tuple[int, ...]) -> Tensor:
    try:
        data = a.data.reshape(shape)
    except ValueError as exc:
        raise DimensionError(f"reshape: cannot reshape {a.shape} into {shape}") from exc

    def _backward(g):
        return (g.reshape(a.shape),)

    return Tensor._from_op(data.copy(), (a,), _backward, "reshape")


def index(a: Tensor, key) -> Tensor:
    data = np.array(a.data[key], dtype=np.float64)

    def _backward(g):
        grad = np.zeros_like(a.data)
        np.add.at(grad, key, g)
        return (grad,)

    return Tensor._from_op(data, (a,), _backward, "index")


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    try:
        data = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        raise DimensionError(f"concat: incompatible shapes {[t.shape for t in tensors]}") from exc
    splits = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def _backward(g):
        return tuple(np.split(g, splits, axis=axis))

    return Tensor._from_op(data, tuple(tensors), _backward, "concat")


def stack(tensors: Sequence[Tensor]) -> Tensor:
    """Stack equally shaped tensors along a new leading axis."""
    tensors = [as_tensor(t) for t in tensors]
    shapes = {t.shape for t in tensors}
    if len(shapes) != 1:
        raise DimensionError(f"stack: shapes differ {sorted(shapes)}")

    def _backward(g):
        return tuple(g[i] for i in range(len(tensors)))

    return Tensor._from_op(np.stack([t.data for t in tensors]), tuple(tensors), _backward, "stack")


def tensor_sum(a: Tensor, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
    data = np.asarray(a.data.sum(axis=axis, keepdims=keepdims), dtype=np.float64)

    def _backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return Tensor._from_op(data, (a,), _backward, "sum")


def tensor_mean(a: Tensor, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
    count = a.size if axis is None else a.shape[axis]
    return mul(tensor_sum(a, axis=axis, keepdims=keepdims), 1.0 / count)


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)

    def _backward(g):
        return (g * out,)

    return Tensor._from_op(out, (a,), _backward, "exp")


def log(a: Tensor) -> Tensor:
    def _backward(g):
        return (g / a.data,)

    return Tensor._from_op(np.log(a.data), (a,), _backward, "log")


def clamp_min(a: Tensor, minimum: float) -> Tensor:
    """Elementwise max(a, minimum); no gradient flows through clamped entries."""
    passed = a.data > minimum

    def _backward(g):
        return (g * passed,)

    return Tensor._from_op(np.where(passed, a.data, minimum), (a,), _backward, "clamp_min")


def sigmoid(a: Tensor) -> Tensor:
    out = 0.5 * (1.0 + np.tanh(0.5 * a.data))

    def _backward(g):
        return (g * out * (1.0 - out),)

    return Tensor._from_op(out, (a,), _backward, "sigmoid")


_GELU_C = np.sqrt(2.0 / np.pi)


def gelu(a: Tensor) -> Tensor:
    """Tanh-approximated GELU; smooth everywhere, which keeps gradient checks clean."""
    x = a.data
    t = np.tanh(_GELU_C * (x + 0.044715 * x ** 3))

    def _backward(g):
        dt = (1.0 - t * t) * _GELU_C * (1.0 + 3 * 0.044715 * x * x)
        return (g * (0.5 * (1.0 + t) + 0.5 * x * dt),)

    return Tensor._from_op(0.5 * x * (1.0 + t), (a,), _backward, "gelu")


def softmax_last_axis(x: Tensor) -> Tensor:
    if x.ndim == 0 or x.shape[-1] < 1:
        raise DimensionError(f"softmax: last axis must be non-empty, got shape {x.shape}")
    shifted = np.exp(x.data - x.data.max(axis=-1, keepdims=True))
    out = shifted / shifted.sum(axis=-1, keepdims=True)

    def _backward(g):
        return (out * (g - (g * out).sum(axis=-1, keepdims=True)),)

    return Tensor._from_op(out, (x,), _backward, "softmax")


def log_softmax_last_axis(x: Tensor) -> Tensor:
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    out = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))

    def _backward(g):
        return (g - np.exp(out) * g.sum(axis=-1, keepdims=True),)

    return Tensor._from_op(out, (x,), _backward, "log_softmax")


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize every last-axis slice to zero mean and unit variance, then scale and shift."""
    width = x.shape[-1]
    if gamma.shape != (width,) or beta.shape != (width,):
        raise DimensionError(
            f"layer_norm: input {x.shape} needs gamma/beta of shape ({width},), got {gamma.shape} and {beta.shape}"
        )
    centered = x.data - x.data.mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt((centered ** 2).mean(axis=-1, keepdims=True) + eps)
    xhat = centered * inv

    def _backward(g):
        dxhat = g * gamma.data
        dx = inv * (
            dxhat
            - dxhat.mean(axis=-1, keepdims=True)
            - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
        )
        dgamma = (g * xhat).reshape(-1, width).sum(axis=0)
        dbeta = g.reshape(-1, width).sum(axis=0)
        return dx, dgamma, dbeta

    return Tensor._from_op(xhat * gamma.data + beta.data, (x, gamma, beta), _backward, "layer_norm")


def l2_normalize(v: Tensor, eps: float = 1e-12) -> Tensor:
    """Scale every last-axis slice to unit Euclidean norm; slices with norm <= eps are divided by eps."""
    norm = np.sqrt((v.data ** 2).sum(axis=-1, keepdims=True))
    guarded = norm > eps
    denom = np.where(guarded, norm, eps if eps > 0 else 1.0)
    out = v.data / denom
    if _DEBUG and not np.all(guarded):
        warnings.warn("l2_normalize received a vector with norm <= eps", GeoFuseWarning)

    def _backward(g):
        projected = g - out * (g * out).sum(axis=-1, keepdims=True)
        return (np.where(guarded, projected, g) / denom,)

    return Tensor._from_op(out, (v,), _backward, "l2_normalize")


def _topological_order(root: Tensor) -> list:
    order, visited = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in visited:
                stack.append((parent, False))
    return order


ParameterSet = Union[Mapping[str, Parameter], Iterable[Parameter]]


def _as_named(parameters: ParameterSet) -> Dict[str, Parameter]:
    if isinstance(parameters, Mapping):
        return dict(parameters)
    return {p.name: p for p in parameters}


def gradient_map(parameters: ParameterSet) -> Dict[str, Tensor]:
    """Current accumulated gradients; zeros for parameters that received none."""
    return {
        name: Tensor(p.grad if p.grad is not None else np.zeros_like(p.data))
        for name, p in _as_named(parameters).items()
    }


def zero_grad(parameters: ParameterSet) -> None:
    for p in _as_named(parameters).values():
        p.zero_grad()


def backward(loss: Tensor, parameters: Optional[ParameterSet] = None) -> Dict[str, Tensor]:
    """
    Accumulate d(loss)/d(leaf) into every reachable tracked leaf.

    Repeated calls add to the existing gradients; call `zero_grad` between
    steps. Returns the gradient map of `parameters` when given.
    """
    if loss.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")

    grads = {id(loss): np.ones_like(loss.data)}
    for node in reversed(_topological_order(loss)):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._backward is None:
            if node.grad_enabled:
                node._accumulate(g)
            continue
        for parent, parent_grad in zip(node._parents, node._backward(g)):
            if parent_grad is None or not parent.grad_enabled:
                continue
            key = id(parent)
            grads[key] = grads[key] + parent_grad if key in grads else parent_grad

    if parameters is None:
        return {}
    return gradient_map(parameters)
