"""
Differentiable operations on Tensors.

Each operation is a Function subclass with a numpy forward and an analytic
backward, plus a thin wrapper that validates arguments.
"""

import math
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import expit

from .exceptions import InvalidArgumentError
from .tensor import Function, Tensor, as_tensor

IntOrTuple = Union[int, Sequence[int]]


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to the original operand shape."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _ntuple(value: IntOrTuple, n: int, name: str) -> Tuple[int, ...]:
    if isinstance(value, (int, np.integer)):
        return (int(value),) * n
    value = tuple(int(v) for v in value)
    if len(value) != n:
        raise InvalidArgumentError(f"{name} needs {n} values, got {len(value)}")
    return value


# Elementwise arithmetic

class Add(Function):
    def forward(self, a, b):
        self.save_for_backward(a.shape, b.shape)
        return a + b

    def backward(self, grad):
        a_shape, b_shape = self.saved
        return _unbroadcast(grad, a_shape), _unbroadcast(grad, b_shape)


class Sub(Function):
    def forward(self, a, b):
        self.save_for_backward(a.shape, b.shape)
        return a - b

    def backward(self, grad):
        a_shape, b_shape = self.saved
        return _unbroadcast(grad, a_shape), _unbroadcast(-grad, b_shape)


class Mul(Function):
    def forward(self, a, b):
        self.save_for_backward(a, b)
        return a * b

    def backward(self, grad):
        a, b = self.saved
        return _unbroadcast(grad * b, a.shape), _unbroadcast(grad * a, b.shape)


class Div(Function):
    def forward(self, a, b):
        self.save_for_backward(a, b)
        return a / b

    def backward(self, grad):
        a, b = self.saved
        return _unbroadcast(grad / b, a.shape), _unbroadcast(-grad * a / (b * b), b.shape)


class Power(Function):
    def forward(self, x, exponent):
        self.save_for_backward(x, exponent)
        return np.power(x, exponent)

    def backward(self, grad):
        x, exponent = self.saved
        return (grad * exponent * np.power(x, exponent - 1),)


class Exp(Function):
    def forward(self, x):
        out = np.exp(x)
        self.save_for_backward(out)
        return out

    def backward(self, grad):
        (out,) = self.saved
        return (grad * out,)


class Log(Function):
    def forward(self, x):
        self.save_for_backward(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.log(x)

    def backward(self, grad):
        (x,) = self.saved
        return (grad / x,)


class Sigmoid(Function):
    def forward(self, x):
        out = expit(x)
        self.save_for_backward(out)
        return out

    def backward(self, grad):
        (out,) = self.saved
        return (grad * out * (1.0 - out),)


class ReLU(Function):
    def forward(self, x):
        mask = x > 0
        self.save_for_backward(mask)
        return np.where(mask, x, 0).astype(x.dtype)

    def backward(self, grad):
        (mask,) = self.saved
        return (grad * mask,)


class Clamp(Function):
    def forward(self, x, low, high):
        self.save_for_backward((x >= low) & (x <= high))
        return np.clip(x, low, high)

    def backward(self, grad):
        (mask,) = self.saved
        return (grad * mask,)


# Shape and reduction

class MatMul(Function):
    def forward(self, a, b):
        if a.ndim < 2 or b.ndim < 2:
            raise InvalidArgumentError(f"matmul needs operands with ndim >= 2, got {a.shape} and {b.shape}")
        self.save_for_backward(a, b)
        return np.matmul(a, b)

    def backward(self, grad):
        a, b = self.saved
        grad_a = np.matmul(grad, np.swapaxes(b, -1, -2))
        grad_b = np.matmul(np.swapaxes(a, -1, -2), grad)
        return _unbroadcast(grad_a, a.shape), _unbroadcast(grad_b, b.shape)


class Sum(Function):
    def forward(self, x, axis=None, keepdims=False):
        self.save_for_backward(x.shape, axis, keepdims)
        return np.asarray(x.sum(axis=axis, keepdims=keepdims))

    def backward(self, grad):
        shape, axis, keepdims = self.saved
        if axis is not None and not keepdims:
            axes = (axis,) if isinstance(axis, int) else tuple(axis)
            axes = tuple(a % len(shape) for a in axes)
            for a in sorted(axes):
                grad = np.expand_dims(grad, a)
        return (np.broadcast_to(grad, shape).copy(),)


class Reshape(Function):
    def forward(self, x, shape):
        self.save_for_backward(x.shape)
        return x.reshape(shape)

    def backward(self, grad):
        (shape,) = self.saved
        return (grad.reshape(shape),)


class Transpose(Function):
    def forward(self, x, axes=None):
        axes = tuple(reversed(range(x.ndim))) if axes is None else tuple(axes)
        self.save_for_backward(axes)
        return np.transpose(x, axes)

    def backward(self, grad):
        (axes,) = self.saved
        return (np.transpose(grad, np.argsort(axes)),)


class GetItem(Function):
    def forward(self, x, index):
        self.save_for_backward(x.shape, x.dtype, index)
        return np.array(x[index])

    def backward(self, grad):
        shape, dtype, index = self.saved
        out = np.zeros(shape, dtype=dtype)
        parts = index if isinstance(index, tuple) else (index,)
        if all(p is Ellipsis or p is None or isinstance(p, (int, np.integer, slice)) for p in parts):
            out[index] += grad
        else:
            np.add.at(out, index, grad)
        return (out,)


class Concat(Function):
    def forward(self, *arrays, axis=0):
        self.save_for_backward(axis, [a.shape[axis] for a in arrays])
        return np.concatenate(arrays, axis=axis)

    def backward(self, grad):
        axis, sizes = self.saved
        splits = np.cumsum(sizes)[:-1]
        return tuple(np.split(grad, splits, axis=axis))


# Normalization and attention primitives

class Softmax(Function):
    def forward(self, x, axis=-1):
        shifted = x - x.max(axis=axis, keepdims=True)
        e = np.exp(shifted)
        out = e / e.sum(axis=axis, keepdims=True)
        self.save_for_backward(out, axis)
        return out

    def backward(self, grad):
        out, axis = self.saved
        return (out * (grad - (grad * out).sum(axis=axis, keepdims=True)),)


class BatchNorm(Function):
    def forward(self, x, gamma, beta, running_mean=None, running_var=None, training=True,
                momentum=0.1, eps=1e-5):
        axes = (0,) + tuple(range(2, x.ndim))
        bshape = (1, -1) + (1,) * (x.ndim - 2)
        if training:
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)
            count = x.size // x.shape[1]
            if running_mean is not None:
                running_mean *= (1.0 - momentum)
                running_mean += momentum * mean
            if running_var is not None:
                unbiased = var * count / max(count - 1, 1)
                running_var *= (1.0 - momentum)
                running_var += momentum * unbiased
        else:
            mean, var = running_mean, running_var
        inv_std = 1.0 / np.sqrt(var + eps)
        xhat = (x - mean.reshape(bshape)) * inv_std.reshape(bshape)
        self.save_for_backward(xhat, gamma, inv_std, axes, bshape, training)
        return (xhat * gamma.reshape(bshape) + beta.reshape(bshape)).astype(x.dtype)

    def backward(self, grad):
        xhat, gamma, inv_std, axes, bshape, training = self.saved
        grad_gamma = (grad * xhat).sum(axis=axes)
        grad_beta = grad.sum(axis=axes)
        gxhat = grad * gamma.reshape(bshape)
        if training:
            m = xhat.size // xhat.shape[1]
            grad_x = (inv_std.reshape(bshape) / m) * (
                m * gxhat
                - gxhat.sum(axis=axes).reshape(bshape)
                - xhat * (gxhat * xhat).sum(axis=axes).reshape(bshape)
            )
        else:
            grad_x = gxhat * inv_std.reshape(bshape)
        return grad_x, grad_gamma, grad_beta


class LayerNorm(Function):
    def forward(self, x, gamma, beta, eps=1e-5):
        mean = x.mean(axis=-1, keepdims=True)
        var = x.var(axis=-1, keepdims=True)
        inv_std = 1.0 / np.sqrt(var + eps)
        xhat = (x - mean) * inv_std
        self.save_for_backward(xhat, gamma, inv_std)
        return (xhat * gamma + beta).astype(x.dtype)

    def backward(self, grad):
        xhat, gamma, inv_std = self.saved
        d = xhat.shape[-1]
        lead = tuple(range(grad.ndim - 1))
        grad_gamma = (grad * xhat).sum(axis=lead)
        grad_beta = grad.sum(axis=lead)
        gxhat = grad * gamma
        grad_x = (inv_std / d) * (
            d * gxhat - gxhat.sum(axis=-1, keepdims=True) - xhat * (gxhat * xhat).sum(axis=-1, keepdims=True)
        )
        return grad_x, grad_gamma, grad_beta


# Convolution and pooling

def _window(offset, dilation, stride, out_shape):
    """Strided slice of the padded input that feeds every output for one kernel tap."""
    slices = [slice(None), slice(None)]
    for o, d, s, n in zip(offset, dilation, stride, out_shape):
        start = o * d
        slices.append(slice(start, start + s * (n - 1) + 1, s))
    return tuple(slices)


class ConvNd(Function):
    """
    N-d cross-correlation over the trailing spatial axes of a (N, C, *S) input.

    The kernel is applied one tap at a time as a grouped matmul, which keeps
    memory proportional to the output rather than to output x kernel volume.
    """

    def forward(self, x, w, stride, dilation, padding, groups):
        n = w.ndim - 2
        N, C_in = x.shape[:2]
        C_out = w.shape[0]
        kernel = w.shape[2:]
        pad_width = [(0, 0), (0, 0)] + [(p, p) for p in padding]
        xp = np.pad(x, pad_width) if any(padding) else x
        out_shape = tuple(
            (x.shape[2 + i] + 2 * padding[i] - dilation[i] * (kernel[i] - 1) - 1) // stride[i] + 1
            for i in range(n)
        )
        P = int(np.prod(out_shape))
        wg = w.reshape(groups, C_out // groups, C_in // groups, *kernel)
        out = np.zeros((N, groups, C_out // groups, P), dtype=np.result_type(x, w))
        for offset in np.ndindex(*kernel):
            xs = xp[_window(offset, dilation, stride, out_shape)].reshape(N, groups, C_in // groups, P)
            out += np.matmul(wg[(slice(None),) * 3 + offset], xs)
        self.save_for_backward(xp, wg, x.shape, w.shape, stride, dilation, padding, groups, out_shape)
        return out.reshape((N, C_out) + out_shape)

    def backward(self, grad):
        xp, wg, x_shape, w_shape, stride, dilation, padding, groups, out_shape = self.saved
        N, C_in = x_shape[:2]
        C_out = w_shape[0]
        P = int(np.prod(out_shape))
        g = grad.reshape(N, groups, C_out // groups, P)
        grad_xp = np.zeros_like(xp)
        grad_wg = np.zeros_like(wg)
        for offset in np.ndindex(*w_shape[2:]):
            window = _window(offset, dilation, stride, out_shape)
            xs = xp[window].reshape(N, groups, C_in // groups, P)
            tap = (slice(None),) * 3 + offset
            grad_wg[tap] = np.matmul(g, np.swapaxes(xs, -1, -2)).sum(axis=0)
            grad_xs = np.matmul(np.swapaxes(wg[tap], -1, -2), g)
            grad_xp[window] += grad_xs.reshape((N, C_in) + out_shape)
        unpad = (slice(None), slice(None)) + tuple(slice(p, p + s) for p, s in zip(padding, x_shape[2:]))
        return grad_xp[unpad], grad_wg.reshape(w_shape)


class MaxPoolNd(Function):
    def forward(self, x, kernel, stride, padding):
        n = len(kernel)
        pad_width = [(0, 0), (0, 0)] + [(p, p) for p in padding]
        xp = np.pad(x, pad_width, constant_values=-np.inf) if any(padding) else x
        out_shape = tuple((x.shape[2 + i] + 2 * padding[i] - kernel[i]) // stride[i] + 1 for i in range(n))
        best = np.full(x.shape[:2] + out_shape, -np.inf, dtype=x.dtype)
        arg = np.zeros(best.shape, dtype=np.int32)
        dilation = (1,) * n
        for k, offset in enumerate(np.ndindex(*kernel)):
            xs = xp[_window(offset, dilation, stride, out_shape)]
            better = xs > best
            best = np.where(better, xs, best)
            arg[better] = k
        self.save_for_backward(xp.shape, x.shape, arg, kernel, stride, padding, out_shape)
        return best

    def backward(self, grad):
        xp_shape, x_shape, arg, kernel, stride, padding, out_shape = self.saved
        grad_xp = np.zeros(xp_shape, dtype=grad.dtype)
        dilation = (1,) * len(kernel)
        for k, offset in enumerate(np.ndindex(*kernel)):
            grad_xp[_window(offset, dilation, stride, out_shape)] += grad * (arg == k)
        unpad = (slice(None), slice(None)) + tuple(slice(p, p + s) for p, s in zip(padding, x_shape[2:]))
        return (grad_xp[unpad],)


# Public wrappers

def add(a, b) -> Tensor:
    return Add.apply(a, b)


def sub(a, b) -> Tensor:
    return Sub.apply(a, b)


def mul(a, b) -> Tensor:
    return Mul.apply(a, b)


def div(a, b) -> Tensor:
    return Div.apply(a, b)


def power(x, exponent: float) -> Tensor:
    return Power.apply(x, exponent=float(exponent))


def exp(x) -> Tensor:
    return Exp.apply(x)


def log(x) -> Tensor:
    return Log.apply(x)


def sigmoid(x) -> Tensor:
    return Sigmoid.apply(x)


def relu(x) -> Tensor:
    """Elementwise max(0, x)."""
    return ReLU.apply(x)


def clamp(x, low: float, high: float) -> Tensor:
    return Clamp.apply(x, low=low, high=high)


def matmul(a, b) -> Tensor:
    return MatMul.apply(a, b)


def sum(x, axis=None, keepdims: bool = False) -> Tensor:
    return Sum.apply(x, axis=axis, keepdims=keepdims)


def mean(x, axis=None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    if axis is None:
        count = x.size
    else:
        axes = (axis,) if isinstance(axis, int) else tuple(axis)
        count = int(np.prod([x.shape[a] for a in axes]))
    return mul(Sum.apply(x, axis=axis, keepdims=keepdims), 1.0 / count)


def reshape(x, shape) -> Tensor:
    return Reshape.apply(x, shape=tuple(shape))


def transpose(x, axes=None) -> Tensor:
    return Transpose.apply(x, axes=axes)


def getitem(x, index) -> Tensor:
    return GetItem.apply(x, index=index)


def concat(tensors: Sequence, axis: int = 0) -> Tensor:
    return Concat.apply(*tensors, axis=axis)


def softmax(x, axis: int = -1) -> Tensor:
    """
    Softmax along an axis, computed with max-subtraction so large inputs do not overflow.

    Args:
        x: Input tensor
        axis: Axis that sums to 1 in the output

    Returns:
        Tensor of the same shape
    """
    return Softmax.apply(x, axis=axis)


def linear(x, weight, bias=None) -> Tensor:
    """
    Affine map over the last axis: x @ weight.T + bias.

    Args:
        x: Input of shape (..., in_features)
        weight: Tensor of shape (out_features, in_features)
        bias: Optional tensor of shape (out_features,)

    Returns:
        Tensor of shape (..., out_features)
    """
    x, weight = as_tensor(x), as_tensor(weight)
    if x.shape[-1] != weight.shape[1]:
        raise InvalidArgumentError(f"linear: input has {x.shape[-1]} features, weight expects {weight.shape[1]}")
    if x.ndim == 1:
        out = reshape(matmul(reshape(x, (1, -1)), transpose(weight)), (weight.shape[0],))
    else:
        out = matmul(x, transpose(weight))
    if bias is not None:
        out = add(out, bias)
    return out


def batch_norm(x, gamma, beta, running_mean: Optional[np.ndarray] = None, running_var: Optional[np.ndarray] = None,
               training: bool = True, momentum: float = 0.1, eps: float = 1e-5) -> Tensor:
    """
    Batch normalization over every axis except the channel axis (axis 1).

    In training mode the batch statistics normalize the input and the running
    statistics (numpy arrays, updated in place) move towards them with the
    given momentum. In eval mode the running statistics are used.

    Args:
        x: Input of shape (N, C, ...)
        gamma: Scale of shape (C,)
        beta: Shift of shape (C,)
        running_mean: Running mean array of shape (C,), required in eval mode
        running_var: Running variance array of shape (C,), required in eval mode
        training: Use batch statistics when True
        momentum: Running statistics momentum
        eps: Variance floor

    Returns:
        Normalized tensor of the input's shape
    """
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    if x.ndim < 2 or gamma.shape != (x.shape[1],) or beta.shape != (x.shape[1],):
        raise InvalidArgumentError(
            f"batch_norm: channel dimension {x.shape[1] if x.ndim > 1 else None} does not match "
            f"gamma {gamma.shape} / beta {beta.shape}"
        )
    if not training and (running_mean is None or running_var is None):
        raise InvalidArgumentError("batch_norm: eval mode needs running statistics")
    return BatchNorm.apply(x, gamma, beta, running_mean=running_mean, running_var=running_var,
                           training=training, momentum=momentum, eps=eps)


def layer_norm(x, gamma, beta, eps: float = 1e-5) -> Tensor:
    """Normalize each position over its last axis, then scale and shift."""
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    if gamma.shape != (x.shape[-1],) or beta.shape != (x.shape[-1],):
        raise InvalidArgumentError(f"layer_norm: feature size {x.shape[-1]} does not match gamma {gamma.shape}")
    return LayerNorm.apply(x, gamma, beta, eps=eps)


def _resolve_padding(padding, kernel, dilation, n):
    if isinstance(padding, str):
        if padding != "same":
            raise InvalidArgumentError(f"Unknown padding mode '{padding}'")
        for k, d in zip(kernel, dilation):
            if (k - 1) * d % 2:
                raise InvalidArgumentError(f"'same' padding needs an odd effective kernel, got k={k}, d={d}")
        return tuple((k - 1) * d // 2 for k, d in zip(kernel, dilation))
    return _ntuple(padding, n, "padding")


def _conv(x, weight, bias, stride, dilation, padding, groups, n: int, name: str) -> Tensor:
    x, weight = as_tensor(x), as_tensor(weight)
    unbatched = x.ndim == n + 1
    if unbatched:
        x = reshape(x, (1,) + x.shape)
    if x.ndim != n + 2 or weight.ndim != n + 2:
        raise InvalidArgumentError(f"{name}: expected input with {n + 1} or {n + 2} dims and weight with {n + 2}, "
                                   f"got {x.shape} and {weight.shape}")
    kernel = weight.shape[2:]
    stride = _ntuple(stride, n, "stride")
    dilation = _ntuple(dilation, n, "dilation")
    padding = _resolve_padding(padding, kernel, dilation, n)
    c_in = x.shape[1]
    if groups < 1 or c_in % groups or weight.shape[0] % groups or weight.shape[1] * groups != c_in:
        raise InvalidArgumentError(f"{name}: {c_in} input channels incompatible with weight {weight.shape} "
                                   f"and groups={groups}")
    for i in range(n):
        span = (kernel[i] - 1) * dilation[i] + 1
        if x.shape[2 + i] + 2 * padding[i] < span:
            raise InvalidArgumentError(f"{name}: axis {i} of length {x.shape[2 + i]} (padding {padding[i]}) "
                                       f"is shorter than the kernel span {span}")
    if min(stride) < 1 or min(dilation) < 1:
        raise InvalidArgumentError(f"{name}: stride and dilation must be >= 1")
    out = ConvNd.apply(x, weight, stride=stride, dilation=dilation, padding=padding, groups=groups)
    if bias is not None:
        out = add(out, reshape(as_tensor(bias), (1, -1) + (1,) * n))
    if unbatched:
        out = reshape(out, out.shape[1:])
    return out


def conv1d(x, weight, bias=None, stride: int = 1, dilation: int = 1, padding: Union[int, str] = 0,
           groups: int = 1) -> Tensor:
    """
    1-D cross-correlation.

    Args:
        x: Input of shape (C_in, L) or (N, C_in, L)
        weight: Kernel of shape (C_out, C_in / groups, K)
        bias: Optional tensor of shape (C_out,)
        stride: Output step
        dilation: Spacing between kernel taps
        padding: Zero padding on both ends, or 'same'
        groups: Channel groups; groups == C_in gives a depthwise convolution

    Returns:
        Tensor of shape (C_out, L_out) or (N, C_out, L_out) with
        L_out = floor((L + 2*padding - dilation*(K-1) - 1) / stride) + 1
    """
    return _conv(x, weight, bias, stride, dilation, padding, groups, 1, "conv1d")


def conv2d(x, weight, bias=None, stride: IntOrTuple = 1, dilation: IntOrTuple = 1,
           padding: Union[IntOrTuple, str] = 0, groups: int = 1) -> Tensor:
    """2-D cross-correlation over the two trailing axes; see conv1d."""
    return _conv(x, weight, bias, stride, dilation, padding, groups, 2, "conv2d")


def conv3d(x, weight, bias=None, stride: IntOrTuple = 1, dilation: IntOrTuple = 1,
           padding: Union[IntOrTuple, str] = 0, groups: int = 1) -> Tensor:
    """3-D cross-correlation over (time, height, width); see conv1d."""
    return _conv(x, weight, bias, stride, dilation, padding, groups, 3, "conv3d")


def max_pool(x, kernel: Sequence[int], stride: Optional[Sequence[int]] = None,
             padding: Optional[Sequence[int]] = None) -> Tensor:
    """Max pooling over the len(kernel) trailing axes of a (N, C, ...) input."""
    x = as_tensor(x)
    kernel = tuple(int(k) for k in kernel)
    stride = kernel if stride is None else tuple(int(s) for s in stride)
    padding = (0,) * len(kernel) if padding is None else tuple(int(p) for p in padding)
    if any(2 * p >= k for p, k in zip(padding, kernel)):
        raise InvalidArgumentError(f"max_pool: padding {padding} too large for kernel {kernel}")
    return MaxPoolNd.apply(x, kernel=kernel, stride=stride, padding=padding)


def binary_cross_entropy(probs, targets, mask=None, clamp_eps: float = 1e-7) -> Tensor:
    """
    Frame-level binary cross-entropy averaged per clip, then over clips.

    Args:
        probs: Speaking probabilities of shape (T,) or (N, T)
        targets: Binary labels of the same shape (constant)
        mask: Optional 0/1 array of the same shape; 0 marks padded frames
        clamp_eps: Probabilities are clamped to [eps, 1 - eps] before the logs

    Returns:
        Scalar loss tensor
    """
    probs = as_tensor(probs)
    y = np.asarray(targets, dtype=probs.dtype)
    if y.shape != probs.shape:
        raise InvalidArgumentError(f"binary_cross_entropy: scores {probs.shape} and labels {y.shape} differ in length")
    p = clamp(probs, clamp_eps, 1.0 - clamp_eps)
    per_frame = add(mul(log(p), y), mul(log(sub(1.0, p)), 1.0 - y))
    if per_frame.ndim == 1:
        per_frame = reshape(per_frame, (1, -1))
        mask = None if mask is None else np.asarray(mask).reshape(1, -1)
    if mask is None:
        mask = np.ones(per_frame.shape, dtype=probs.dtype)
    mask = np.asarray(mask, dtype=probs.dtype)
    counts = np.maximum(mask.sum(axis=1), 1.0)
    per_clip = div(sum(mul(per_frame, mask), axis=1), counts)
    return mul(mean(per_clip), -1.0)


def scaled_dot_product(q, k, v, d: int) -> Tuple[Tensor, Tensor]:
    """
    softmax(q k^T / sqrt(d)) v over the last two axes.

    Returns:
        (output, attention weights)
    """
    if d <= 0:
        raise InvalidArgumentError("scaled_dot_product: d must be positive")
    scores = mul(matmul(q, transpose_last(k)), 1.0 / math.sqrt(d))
    weights = softmax(scores, axis=-1)
    return matmul(weights, v), weights


def transpose_last(x) -> Tensor:
    """Swap the two trailing axes."""
    x = as_tensor(x)
    axes = list(range(x.ndim))
    axes[-1], axes[-2] = axes[-2], axes[-1]
    return transpose(x, tuple(axes))
