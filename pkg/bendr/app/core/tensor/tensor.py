"""
Dense n-dimensional tensor with reverse-mode automatic differentiation.

A `Tensor` wraps a float64 `numpy.ndarray`. Every operation on tensors that require
gradients records its parents and a vector-Jacobian product; `backward()` walks the
recorded graph in reverse topological order and accumulates gradients into the
`grad` buffers of leaf tensors.

Every forward result is checked for finiteness: a NaN or infinity raises
`NonFiniteError` naming the operation instead of propagating silently.

Example:
    .. code-block:: python

        from bendr.app.core.tensor import Tensor

        x = Tensor([1.0, 2.0], requires_grad=True)
        (x * x).sum().backward()
        print(x.grad)   # [2. 4.]
"""

from typing import Callable, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from bendr.app.core.exceptions import GraphError, NonFiniteError, ShapeError


ArrayLike = Union["Tensor", np.ndarray, float, int, Sequence[float]]
BackwardFn = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """ Sum a broadcast gradient back down to `shape`. """
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    """
    A float64 array that can participate in reverse-mode differentiation.

    Attributes:
        data (np.ndarray): Values in row-major order.
        requires_grad (bool): Whether gradients flow to (or through) this tensor.
        grad (Optional[np.ndarray]): Accumulated gradient, same shape as `data` (leaves only).
        name (Optional[str]): Optional label used in diagnostics.
    """

    __array_priority__ = 100

    def __init__(self, data: ArrayLike, requires_grad: bool = False, name: Optional[str] = None):
        if isinstance(data, Tensor):
            data = data.data
        self.data: np.ndarray = np.array(data, dtype=np.float64)
        self.requires_grad: bool = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self.name = name
        self._parents: Tuple["Tensor", ...] = ()
        self._backward: Optional[BackwardFn] = None
        self._op: str = "leaf"

    # --- convenience ---
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
    def is_leaf(self) -> bool:
        return self._backward is None

    def numpy(self) -> np.ndarray:
        """ Return a copy of the underlying values. """
        return self.data.copy()

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() requires a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        """ Return a tensor sharing no graph history with this one. """
        return Tensor(self.data.copy())

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.data)

    def __repr__(self) -> str:
        req = ", requires_grad=True" if self.requires_grad else ""
        nm = f", name={self.name}" if self.name else ""
        return f"Tensor(shape={self.shape}{req}{nm})"

    def __len__(self) -> int:
        return self.shape[0]

    # --- graph construction ---
    @staticmethod
    def make(data: np.ndarray, parents: Iterable["Tensor"], backward: BackwardFn, op: str) -> "Tensor":
        """
        Create the result of an operation and record it in the graph.

        Args:
            data (np.ndarray): Forward result.
            parents (Iterable[Tensor]): Operands, in the order `backward` returns their gradients.
            backward (BackwardFn): Maps the output gradient to one gradient (or None) per parent.
            op (str): Operation name used in diagnostics.

        Returns:
            Tensor: The recorded result.

        Raises:
            NonFiniteError: If the forward result contains NaN or infinite values.
        """
        data = np.asarray(data, dtype=np.float64)
        if not np.isfinite(data).all():
            raise NonFiniteError(f"Operation '{op}' produced non-finite values")
        parents = tuple(parents)
        out = Tensor.__new__(Tensor)
        out.data = data
        out.grad = None
        out.name = None
        out._op = op
        out.requires_grad = any(p.requires_grad for p in parents)
        if out.requires_grad:
            out._parents = parents
            out._backward = backward
        else:
            out._parents = ()
            out._backward = None
        return out

    # --- autograd core ---
    def _topological_order(self) -> List["Tensor"]:
        """ Iterative depth-first ordering of the graph; raises on cycles. """
        order: List[Tensor] = []
        state = {}
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            key = id(node)
            if expanded:
                state[key] = 2
                order.append(node)
                continue
            if state.get(key) == 2:
                continue
            if state.get(key) == 1:
                raise GraphError(f"Cycle detected in autodiff graph at operation '{node._op}'")
            state[key] = 1
            stack.append((node, True))
            for parent in node._parents:
                if state.get(id(parent)) == 1:
                    raise GraphError(f"Cycle detected in autodiff graph at operation '{parent._op}'")
                if state.get(id(parent)) != 2 and parent.requires_grad:
                    stack.append((parent, False))
        return order

    def backward(self) -> None:
        """
        Accumulate d(self)/d(leaf) into the `grad` buffer of every leaf requiring gradients.

        Raises:
            GraphError: If the tensor is not a scalar, does not depend on any tensor
                requiring gradients, or the graph contains a cycle.
        """
        if self.data.size != 1:
            raise GraphError(f"backward() requires a scalar loss, got shape {self.shape}")
        if not self.requires_grad:
            raise GraphError("backward() called on a loss that is detached from every parameter")

        order = self._topological_order()
        grads = {id(self): np.ones_like(self.data)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            parent_grads = node._backward(g)
            for parent, pg in zip(node._parents, parent_grads):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = pg if key not in grads else grads[key] + pg

    # --- elementwise arithmetic ---
    def __add__(self, other: ArrayLike) -> "Tensor":
        other = as_tensor(other)
        a_shape, b_shape = self.shape, other.shape
        return Tensor.make(self.data + other.data, (self, other),
                           lambda g: (_unbroadcast(g, a_shape), _unbroadcast(g, b_shape)), "add")

    __radd__ = __add__

    def __sub__(self, other: ArrayLike) -> "Tensor":
        other = as_tensor(other)
        a_shape, b_shape = self.shape, other.shape
        return Tensor.make(self.data - other.data, (self, other),
                           lambda g: (_unbroadcast(g, a_shape), _unbroadcast(-g, b_shape)), "sub")

    def __rsub__(self, other: ArrayLike) -> "Tensor":
        return as_tensor(other) - self

    def __mul__(self, other: ArrayLike) -> "Tensor":
        other = as_tensor(other)
        a, b = self.data, other.data
        return Tensor.make(a * b, (self, other),
                           lambda g: (_unbroadcast(g * b, a.shape), _unbroadcast(g * a, b.shape)), "mul")

    __rmul__ = __mul__

    def __truediv__(self, other: ArrayLike) -> "Tensor":
        other = as_tensor(other)
        a, b = self.data, other.data
        return Tensor.make(a / b, (self, other),
                           lambda g: (_unbroadcast(g / b, a.shape), _unbroadcast(-g * a / (b * b), b.shape)), "div")

    def __rtruediv__(self, other: ArrayLike) -> "Tensor":
        return as_tensor(other) / self

    def __neg__(self) -> "Tensor":
        return Tensor.make(-self.data, (self,), lambda g: (-g,), "neg")

    def __pow__(self, exponent: float) -> "Tensor":
        if isinstance(exponent, Tensor):
            raise TypeError("Tensor exponents are not supported; use a Python scalar")
        a = self.data
        return Tensor.make(a ** exponent, (self,), lambda g: (g * exponent * a ** (exponent - 1),), "pow")

    def __matmul__(self, other: ArrayLike) -> "Tensor":
        other = as_tensor(other)
        a, b = self.data, other.data
        if a.ndim < 2 or b.ndim < 2:
            raise ShapeError(f"matmul requires operands with at least 2 dimensions, got {a.shape} and {b.shape}")
        if a.shape[-1] != b.shape[-2]:
            raise ShapeError(f"matmul inner dimensions differ: {a.shape} @ {b.shape}")

        def backward(g):
            ga = g @ np.swapaxes(b, -1, -2)
            gb = np.swapaxes(a, -1, -2) @ g
            return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

        return Tensor.make(a @ b, (self, other), backward, "matmul")

    # --- unary functions ---
    def exp(self) -> "Tensor":
        out = np.exp(self.data)
        return Tensor.make(out, (self,), lambda g: (g * out,), "exp")

    def log(self) -> "Tensor":
        a = self.data
        if (a <= 0).any():
            raise NonFiniteError("log() of a non-positive value")
        return Tensor.make(np.log(a), (self,), lambda g: (g / a,), "log")

    def sqrt(self) -> "Tensor":
        out = np.sqrt(self.data)
        return Tensor.make(out, (self,), lambda g: (g * 0.5 / out,), "sqrt")

    # --- reductions ---
    def sum(self, axis: Optional[Union[int, Tuple[int, ...]]] = None, keepdims: bool = False) -> "Tensor":
        shape = self.shape

        def backward(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, shape).copy(),)

        return Tensor.make(self.data.sum(axis=axis, keepdims=keepdims), (self,), backward, "sum")

    def mean(self, axis: Optional[Union[int, Tuple[int, ...]]] = None, keepdims: bool = False) -> "Tensor":
        if axis is None:
            count = self.size
        else:
            axes = axis if isinstance(axis, tuple) else (axis,)
            count = int(np.prod([self.shape[a] for a in axes]))
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)

    # --- shape manipulation ---
    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        original = self.shape
        return Tensor.make(self.data.reshape(shape), (self,), lambda g: (g.reshape(original),), "reshape")

    def transpose(self, *axes) -> "Tensor":
        if not axes:
            axes = tuple(reversed(range(self.ndim)))
        elif len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        inverse = tuple(np.argsort(axes))
        return Tensor.make(np.transpose(self.data, axes), (self,), lambda g: (np.transpose(g, inverse),), "transpose")

    @property
    def T(self) -> "Tensor":
        """ Swap the last two axes. """
        axes = list(range(self.ndim))
        axes[-1], axes[-2] = axes[-2], axes[-1]
        return self.transpose(tuple(axes))

    def __getitem__(self, index) -> "Tensor":
        if isinstance(index, Tensor):
            index = index.data.astype(np.int64)
        shape = self.shape

        def backward(g):
            full = np.zeros(shape)
            np.add.at(full, index, g)
            return (full,)

        return Tensor.make(self.data[index], (self,), backward, "getitem")


def as_tensor(value: ArrayLike) -> Tensor:
    """ Wrap arrays and scalars as constant tensors; pass tensors through. """
    return value if isinstance(value, Tensor) else Tensor(value)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    """
    Concatenate tensors along an existing axis.

    Args:
        tensors (Sequence[Tensor]): Tensors with matching shapes except along `axis`.
        axis (int): Concatenation axis.

    Returns:
        Tensor: The concatenation.
    """
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=axis))

    return Tensor.make(np.concatenate([t.data for t in tensors], axis=axis), tensors, backward, "concat")
