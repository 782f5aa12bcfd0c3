"""
Tensor type and reverse-mode differentiation engine.

A Tensor wraps a numpy array. Every differentiable operation is a Function
subclass; applying it records the Function on the output so that an OpGraph
can later be assembled from any scalar output and traversed backwards.
"""

import logging
import threading
from contextlib import contextmanager
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .exceptions import InvalidArgumentError, NumericError

logger = logging.getLogger(__name__)

PRECISIONS = {
    "float32": np.float32,
    "float64": np.float64,
}

_default_dtype = np.float32
_state = threading.local()


def set_precision(name: str) -> None:
    """
    Set the default floating point precision for new tensors.

    Args:
        name: 'float32' (default) or 'float64' (tight gradient checks only)
    """
    global _default_dtype
    if name not in PRECISIONS:
        raise InvalidArgumentError(f"Unknown precision '{name}'. Expected one of: {', '.join(PRECISIONS)}")
    _default_dtype = PRECISIONS[name]


def get_default_dtype():
    """Return the numpy dtype used for new tensors."""
    return _default_dtype


@contextmanager
def precision(name: str):
    """Temporarily switch the default precision."""
    global _default_dtype
    previous = _default_dtype
    set_precision(name)
    try:
        yield
    finally:
        _default_dtype = previous


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


ArrayLike = Union["Tensor", np.ndarray, float, int, Sequence]


class Tensor:
    """
    An n-dimensional array of floats that can take part in a differentiation graph.
    """

    def __init__(self, data: ArrayLike, requires_grad: bool = False, _ctx: Optional["Function"] = None,
                 name: Optional[str] = None):
        """
        Initialize a Tensor.

        Args:
            data: Array-like values; non-float input is cast to the default precision
            requires_grad: Whether gradients should be computed for this tensor
            _ctx: The Function that produced this tensor (internal)
            name: Optional label used in error messages and checkpoints
        """
        if isinstance(data, Tensor):
            data = data.data
        array = np.asarray(data)
        if array.dtype not in (np.float32, np.float64):
            array = array.astype(_default_dtype)
        self.data = array
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self._ctx = _ctx
        self.name = name

    @property
    def shape(self) -> Tuple[int, ...]:
        """Get the shape of the tensor."""
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def is_leaf(self) -> bool:
        return self._ctx is None

    def __repr__(self) -> str:
        label = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad}{label})"

    def __len__(self) -> int:
        return self.shape[0]

    def numpy(self) -> np.ndarray:
        """Get the underlying numpy array."""
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.size == 1 else float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> Dict[int, np.ndarray]:
        """
        Compute gradients of this scalar tensor with respect to every leaf.

        Returns:
            Dictionary mapping id(leaf) to its gradient array
        """
        return backward(OpGraph.from_output(self), self)

    # Operators
    def __add__(self, other):
        from . import functional as F
        return F.add(self, other)

    def __radd__(self, other):
        from . import functional as F
        return F.add(other, self)

    def __sub__(self, other):
        from . import functional as F
        return F.sub(self, other)

    def __rsub__(self, other):
        from . import functional as F
        return F.sub(other, self)

    def __mul__(self, other):
        from . import functional as F
        return F.mul(self, other)

    def __rmul__(self, other):
        from . import functional as F
        return F.mul(other, self)

    def __truediv__(self, other):
        from . import functional as F
        return F.div(self, other)

    def __rtruediv__(self, other):
        from . import functional as F
        return F.div(other, self)

    def __neg__(self):
        from . import functional as F
        return F.mul(self, -1.0)

    def __pow__(self, exponent: float):
        from . import functional as F
        return F.power(self, exponent)

    def __matmul__(self, other):
        from . import functional as F
        return F.matmul(self, other)

    def __getitem__(self, index):
        from . import functional as F
        return F.getitem(self, index)

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        from . import functional as F
        return F.sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        from . import functional as F
        return F.mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape) -> "Tensor":
        from . import functional as F
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return F.reshape(self, shape)

    def transpose(self, *axes) -> "Tensor":
        from . import functional as F
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return F.transpose(self, axes or None)


def as_tensor(value: ArrayLike) -> Tensor:
    """Wrap a value as a constant Tensor unless it already is one."""
    if isinstance(value, Tensor):
        return value
    array = np.asarray(value)
    if array.dtype not in (np.float32, np.float64):
        array = array.astype(_default_dtype)
    return Tensor(array)


def check_finite(array: np.ndarray, op_name: str) -> None:
    """Raise NumericError if the array holds NaN or Inf."""
    if not np.isfinite(array).all():
        raise NumericError(op_name, int((~np.isfinite(array)).sum()))


class Function:
    """
    Base class for differentiable operations.

    Subclasses implement forward(*arrays, **kwargs) -> array and
    backward(grad) -> tuple with one gradient (or None) per input.
    """

    def __init__(self):
        self.parents: Tuple[Tensor, ...] = ()
        self.saved: tuple = ()

    @property
    def name(self) -> str:
        return type(self).__name__

    def save_for_backward(self, *values) -> None:
        self.saved = values

    def forward(self, *arrays, **kwargs) -> np.ndarray:
        raise NotImplementedError("Subclasses must implement forward()")

    def backward(self, grad: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        raise NotImplementedError("Subclasses must implement backward()")

    @classmethod
    def apply(cls, *inputs, **kwargs) -> Tensor:
        fn = cls()
        tensors = tuple(as_tensor(x) for x in inputs)
        fn.parents = tensors
        out = fn.forward(*[t.data for t in tensors], **kwargs)
        check_finite(out, fn.name)
        requires_grad = is_grad_enabled() and any(t.requires_grad for t in tensors)
        return Tensor(out, requires_grad=requires_grad, _ctx=fn if requires_grad else None)


class OpGraph:
    """
    Topologically ordered record of the operations leading to an output tensor.
    """

    def __init__(self, order: List[Tensor]):
        """
        Args:
            order: Tensors in topological order (inputs before the nodes that use them)
        """
        self.order = order

    @classmethod
    def from_output(cls, output: Tensor) -> "OpGraph":
        """
        Build the graph reachable from an output tensor.

        The traversal is iterative and visits parents in argument order, so the
        resulting order is deterministic for a fixed graph.
        """
        order: List[Tensor] = []
        visited = set()
        stack = [(output, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            if node._ctx is not None:
                for parent in reversed(node._ctx.parents):
                    if id(parent) not in visited and parent.requires_grad:
                        stack.append((parent, False))
        return cls(order)

    @property
    def nodes(self) -> List[Tensor]:
        return [t for t in self.order if t._ctx is not None]

    @property
    def leaves(self) -> List[Tensor]:
        return [t for t in self.order if t._ctx is None and t.requires_grad]

    def __len__(self) -> int:
        return len(self.order)

    def __repr__(self) -> str:
        return f"OpGraph(nodes={len(self.nodes)}, leaves={len(self.leaves)})"


def backward(graph: OpGraph, loss: Tensor) -> Dict[int, np.ndarray]:
    """
    Reverse-mode gradient computation.

    Args:
        graph: Graph assembled from the loss tensor
        loss: Scalar output tensor

    Returns:
        Dictionary mapping id(leaf) to dLoss/dLeaf. Gradients are also
        accumulated into each leaf's .grad attribute.

    Raises:
        InvalidArgumentError: If the loss is not a scalar
    """
    if loss.size != 1:
        raise InvalidArgumentError(f"backward() needs a scalar loss, got shape {loss.shape}")

    grads: Dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    leaf_grads: Dict[int, np.ndarray] = {}

    for node in reversed(graph.order):
        grad = grads.pop(id(node), None)
        if grad is None:
            continue
        if node._ctx is None:
            if node.requires_grad:
                leaf_grads[id(node)] = grad
                node.grad = grad.copy() if node.grad is None else node.grad + grad
            continue
        parent_grads = node._ctx.backward(grad)
        for parent, parent_grad in zip(node._ctx.parents, parent_grads):
            if parent_grad is None or not parent.requires_grad:
                continue
            parent_grad = np.asarray(parent_grad, dtype=parent.data.dtype)
            if parent_grad.shape != parent.shape:
                parent_grad = parent_grad.reshape(parent.shape)
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + parent_grad
            else:
                grads[key] = parent_grad

    return leaf_grads


def zero_grad(tensors: Iterable[Tensor]) -> None:
    """Reset .grad on every tensor."""
    for t in tensors:
        t.grad = None
