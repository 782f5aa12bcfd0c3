"""
Parameter containers and layers built on the functional operators.
"""

import logging
from collections import OrderedDict
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import functional as F
from .exceptions import InvalidArgumentError
from .tensor import Tensor, get_default_dtype

logger = logging.getLogger(__name__)


class Parameter(Tensor):
    """A Tensor that is registered as a trainable leaf of a Module."""

    def __init__(self, data, name: Optional[str] = None):
        super().__init__(np.array(data, dtype=get_default_dtype()), requires_grad=True, name=name)


def kaiming_uniform(rng: np.random.Generator, shape: Tuple[int, ...], fan_in: int) -> np.ndarray:
    """He-uniform initialization for ReLU networks: U(-b, b) with b = sqrt(6 / fan_in)."""
    bound = np.sqrt(6.0 / max(fan_in, 1))
    return rng.uniform(-bound, bound, size=shape)


class Module:
    """
    Base class for layers and networks.

    Parameters, buffers (plain numpy arrays such as running statistics) and
    child modules are discovered from attributes in definition order, so
    state_dict keys are stable across runs.
    """

    def __init__(self):
        self.training = True

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError("Subclasses must implement forward()")

    def _buffers(self) -> Dict[str, np.ndarray]:
        return {}

    def children(self) -> Iterator[Tuple[str, "Module"]]:
        for name, value in vars(self).items():
            if isinstance(value, Module):
                yield name, value

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Parameter]]:
        for name, value in vars(self).items():
            if isinstance(value, Parameter):
                yield prefix + name, value
            elif isinstance(value, Module):
                yield from value.named_parameters(prefix + name + ".")

    def parameters(self) -> List[Parameter]:
        return [p for _, p in self.named_parameters()]

    def named_buffers(self, prefix: str = "") -> Iterator[Tuple[str, np.ndarray]]:
        for name, value in self._buffers().items():
            yield prefix + name, value
        for name, child in self.children():
            yield from child.named_buffers(prefix + name + ".")

    def train(self, mode: bool = True) -> "Module":
        self.training = mode
        for _, child in self.children():
            child.train(mode)
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def state_dict(self) -> "OrderedDict[str, np.ndarray]":
        """Copy of every parameter and buffer, keyed by dotted attribute path."""
        state = OrderedDict()
        for name, p in self.named_parameters():
            state[name] = p.data.copy()
        for name, b in self.named_buffers():
            state[name] = b.copy()
        return state

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        """
        Load parameters and buffers in place.

        Raises:
            InvalidArgumentError: On missing keys, unexpected keys or shape mismatches
        """
        targets = dict(self.named_parameters())
        buffers = dict(self.named_buffers())
        expected = set(targets) | set(buffers)
        missing = expected - set(state)
        unexpected = set(state) - expected
        if missing or unexpected:
            raise InvalidArgumentError(
                f"State does not match model: missing {sorted(missing)[:5]}, unexpected {sorted(unexpected)[:5]}"
            )
        for name, value in state.items():
            value = np.asarray(value)
            if name in targets:
                target = targets[name]
                if target.shape != value.shape:
                    raise InvalidArgumentError(f"Shape mismatch for '{name}': {target.shape} vs {value.shape}")
                target.data = value.astype(target.dtype).copy()
            else:
                buf = buffers[name]
                if buf.shape != value.shape:
                    raise InvalidArgumentError(f"Shape mismatch for '{name}': {buf.shape} vs {value.shape}")
                buf[...] = value


class ModuleList(Module):
    """Ordered container whose children are registered as '0', '1', ..."""

    def __init__(self, modules: Sequence[Module] = ()):
        super().__init__()
        self._items: List[Module] = []
        for m in modules:
            self.append(m)

    def append(self, module: Module) -> None:
        setattr(self, str(len(self._items)), module)
        self._items.append(module)

    def __iter__(self):
        return iter(self._items)

    def __len__(self) -> int:
        return len(self._items)

    def __getitem__(self, i: int) -> Module:
        return self._items[i]


class Linear(Module):
    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator, bias: bool = True):
        super().__init__()
        self.in_features = in_features
        self.out_features = out_features
        self.weight = Parameter(kaiming_uniform(rng, (out_features, in_features), in_features))
        self.bias = Parameter(np.zeros(out_features)) if bias else None

    def forward(self, x):
        return F.linear(x, self.weight, self.bias)


class _ConvNd(Module):
    _ndim = 0

    def __init__(self, in_channels: int, out_channels: int, kernel_size, rng: np.random.Generator,
                 stride=1, dilation=1, padding: Union[int, Sequence[int], str] = 0, groups: int = 1,
                 bias: bool = True):
        super().__init__()
        if in_channels % groups or out_channels % groups:
            raise InvalidArgumentError(f"Channels {in_channels}->{out_channels} not divisible by groups={groups}")
        kernel = (kernel_size,) * self._ndim if isinstance(kernel_size, int) else tuple(kernel_size)
        fan_in = (in_channels // groups) * int(np.prod(kernel))
        self.stride = stride
        self.dilation = dilation
        self.padding = padding
        self.groups = groups
        self.weight = Parameter(kaiming_uniform(rng, (out_channels, in_channels // groups) + kernel, fan_in))
        self.bias = Parameter(np.zeros(out_channels)) if bias else None


class Conv1d(_ConvNd):
    _ndim = 1

    def forward(self, x):
        return F.conv1d(x, self.weight, self.bias, stride=self.stride, dilation=self.dilation,
                        padding=self.padding, groups=self.groups)


class Conv2d(_ConvNd):
    _ndim = 2

    def forward(self, x):
        return F.conv2d(x, self.weight, self.bias, stride=self.stride, dilation=self.dilation,
                        padding=self.padding, groups=self.groups)


class Conv3d(_ConvNd):
    _ndim = 3

    def forward(self, x):
        return F.conv3d(x, self.weight, self.bias, stride=self.stride, padding=self.padding,
                        dilation=self.dilation, groups=self.groups)


class BatchNorm(Module):
    """Batch normalization over axis 1 for inputs of any rank >= 2."""

    def __init__(self, num_features: int, momentum: float = 0.1, eps: float = 1e-5):
        super().__init__()
        self.momentum = momentum
        self.eps = eps
        self.weight = Parameter(np.ones(num_features))
        self.bias = Parameter(np.zeros(num_features))
        self.running_mean = np.zeros(num_features, dtype=get_default_dtype())
        self.running_var = np.ones(num_features, dtype=get_default_dtype())

    def _buffers(self):
        return {"running_mean": self.running_mean, "running_var": self.running_var}

    def forward(self, x):
        return F.batch_norm(x, self.weight, self.bias, self.running_mean, self.running_var,
                            training=self.training, momentum=self.momentum, eps=self.eps)


class LayerNorm(Module):
    def __init__(self, num_features: int, eps: float = 1e-5):
        super().__init__()
        self.eps = eps
        self.weight = Parameter(np.ones(num_features))
        self.bias = Parameter(np.zeros(num_features))

    def forward(self, x):
        return F.layer_norm(x, self.weight, self.bias, eps=self.eps)
