"""
Finite-difference verification of analytic gradients.
"""

import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from . import functional as F
from .attention import CrossAttention, SelfAttention, fuse
from .classifier import Classifier
from .exceptions import InvalidArgumentError
from .tensor import PRECISIONS, Tensor, no_grad, precision

logger = logging.getLogger(__name__)


def _projected(fn: Callable[..., Tensor], arrays: Sequence[np.ndarray], projection: np.ndarray) -> float:
    with no_grad():
        out = fn(*[Tensor(a) for a in arrays])
    return float(np.sum(out.data.astype(np.float64) * projection))


def grad_check(fn: Callable[..., Tensor], inputs: Sequence[np.ndarray], eps: float = 1e-3, seed: int = 0,
               wrt: Optional[Sequence[int]] = None, dtype: str = "float32") -> float:
    """
    Compare the analytic gradient of fn against central finite differences.

    The output of fn is reduced to a scalar with a fixed random projection so
    that every output element contributes. The analytic gradient is computed
    at the requested precision; the finite differences always run in float64.

    Args:
        fn: Callable mapping input Tensors to an output Tensor
        inputs: Input arrays, one per positional argument of fn
        eps: Perturbation size
        seed: Seed for the output projection
        wrt: Indices of the inputs to check (all inputs by default)
        dtype: Precision of the analytic pass, 'float32' or 'float64'

    Returns:
        Max over checked coordinates of |a - n| / max(|a|, |n|, 1e-8)

    Raises:
        InvalidArgumentError: If eps is not positive or an input is not finite
    """
    if eps <= 0:
        raise InvalidArgumentError(f"grad_check needs eps > 0, got {eps}")
    arrays64 = [np.asarray(x, dtype=np.float64) for x in inputs]
    for i, a in enumerate(arrays64):
        if not np.isfinite(a).all():
            raise InvalidArgumentError(f"grad_check input {i} contains non-finite values")
    wrt = list(range(len(arrays64))) if wrt is None else list(wrt)

    with precision(dtype):
        tensors = [Tensor(a.astype(PRECISIONS[dtype]), requires_grad=i in wrt) for i, a in enumerate(arrays64)]
        out = fn(*tensors)
        projection = np.random.default_rng(seed).standard_normal(out.shape)
        loss = (out * projection.astype(out.dtype)).sum()
        loss.backward()
    analytic: List[np.ndarray] = [
        np.zeros_like(arrays64[i]) if tensors[i].grad is None else tensors[i].grad.astype(np.float64) for i in wrt
    ]

    worst = 0.0
    with precision("float64"):
        for slot, i in enumerate(wrt):
            base = arrays64[i]
            numeric = np.zeros_like(base)
            for idx in np.ndindex(base.shape):
                plus = [a.copy() for a in arrays64]
                minus = [a.copy() for a in arrays64]
                plus[i][idx] += eps
                minus[i][idx] -= eps
                numeric[idx] = (_projected(fn, plus, projection) - _projected(fn, minus, projection)) / (2 * eps)
            a = analytic[slot]
            denom = np.maximum(np.maximum(np.abs(a), np.abs(numeric)), 1e-8)
            err = float(np.max(np.abs(a - numeric) / denom)) if base.size else 0.0
            logger.debug("grad_check input %d: max relative error %.3e", i, err)
            worst = max(worst, err)
    return worst


GRAD_TOLERANCE = 1e-2


def projection_seed(seed: int) -> int:
    """Seed for the output projection, independent of the stream that builds the inputs."""
    child = np.random.SeedSequence(int(seed)).spawn(1)[0]
    return int(child.generate_state(1)[0])


@dataclass
class GradCase:
    """A differentiable op with an input builder; build(rng) returns (fn, inputs)."""

    name: str
    build: Callable[[np.random.Generator], Tuple[Callable[..., Tensor], List[np.ndarray]]]


def _away_from_zero(rng: np.random.Generator, shape, low: float = 0.2) -> np.ndarray:
    return rng.choice([-1.0, 1.0], size=shape) * rng.uniform(low, 1.0, size=shape)


def _distinct(rng: np.random.Generator, shape) -> np.ndarray:
    # spacing 0.1 keeps +-eps perturbations from swapping the max
    n = int(np.prod(shape))
    return (rng.permutation(n).reshape(shape) * 0.1).astype(np.float64)


def _fusion_case(rng: np.random.Generator):
    d, T = 16, 5
    cross = CrossAttention(d, 2, 2, rng)
    backend = SelfAttention(2 * d, 2, 2, rng)
    head = Classifier(2 * d, rng)

    def fn(F_a, F_v):
        return head(backend(fuse(cross(F_a, F_v))))

    return fn, [rng.standard_normal((T, d)), rng.standard_normal((T, d))]


def _bce_case(rng: np.random.Generator):
    targets = rng.integers(0, 2, size=(2, 4))

    def fn(x):
        return F.binary_cross_entropy(F.softmax(x, axis=-1)[..., 1], targets)

    return fn, [rng.standard_normal((2, 4, 2))]


GRAD_CASES: List[GradCase] = [
    GradCase("add", lambda r: (F.add, [r.standard_normal((3, 4)), r.standard_normal((4,))])),
    GradCase("mul", lambda r: (F.mul, [r.standard_normal((3, 4)), r.standard_normal((3, 1))])),
    GradCase("div", lambda r: (F.div, [r.standard_normal((3, 4)), _away_from_zero(r, (3, 4), 0.5)])),
    GradCase("exp", lambda r: (F.exp, [r.uniform(-1.0, 1.0, (3, 4))])),
    GradCase("log", lambda r: (F.log, [r.uniform(0.5, 2.0, (3, 4))])),
    GradCase("sigmoid", lambda r: (F.sigmoid, [r.standard_normal((3, 4))])),
    GradCase("relu", lambda r: (F.relu, [_away_from_zero(r, (3, 4), 0.1)])),
    GradCase("matmul", lambda r: (F.matmul, [r.standard_normal((2, 3, 4)), r.standard_normal((4, 5))])),
    GradCase("linear", lambda r: (F.linear, [r.standard_normal((4, 4)), r.standard_normal((4, 4)),
                                             r.standard_normal((4,))])),
    GradCase("softmax", lambda r: (F.softmax, [r.standard_normal((3, 5))])),
    GradCase("softmax_cross_entropy", _bce_case),
    GradCase("layer_norm", lambda r: (F.layer_norm, [r.standard_normal((3, 6)), r.uniform(0.5, 1.5, (6,)),
                                                     r.standard_normal((6,))])),
    GradCase("batch_norm", lambda r: (lambda x, g, b: F.batch_norm(x, g, b, training=True),
                                      [r.standard_normal((4, 3, 5)), r.uniform(0.5, 1.5, (3,)),
                                       r.standard_normal((3,))])),
    GradCase("conv1d", lambda r: (lambda x, w, b: F.conv1d(x, w, b, stride=2, dilation=2, padding=2),
                                  [r.standard_normal((2, 3, 9)), r.standard_normal((4, 3, 3)),
                                   r.standard_normal((4,))])),
    GradCase("conv1d_depthwise", lambda r: (lambda x, w: F.conv1d(x, w, padding="same", groups=3),
                                            [r.standard_normal((2, 3, 7)), r.standard_normal((3, 1, 3))])),
    GradCase("conv2d", lambda r: (lambda x, w: F.conv2d(x, w, stride=(2, 1), padding=1),
                                  [r.standard_normal((1, 2, 5, 5)), r.standard_normal((3, 2, 3, 3))])),
    GradCase("conv3d", lambda r: (lambda x, w: F.conv3d(x, w, stride=(1, 2, 2), padding=1),
                                  [r.standard_normal((1, 1, 3, 4, 4)), r.standard_normal((2, 1, 3, 3, 3))])),
    GradCase("max_pool", lambda r: (lambda x: F.max_pool(x, (3, 3), (2, 2), (1, 1)), [_distinct(r, (1, 2, 4, 4))])),
    GradCase("attention", lambda r: (lambda q, k, v: F.scaled_dot_product(q, k, v, 4)[0],
                                     [r.standard_normal((2, 3, 4)), r.standard_normal((2, 5, 4)),
                                      r.standard_normal((2, 5, 4))])),
    GradCase("fusion_classifier", _fusion_case),
]


def check_ops(seeds: Sequence[int] = range(10), dtype: str = "float32", names: Optional[Sequence[str]] = None,
              eps: float = 1e-3) -> pd.DataFrame:
    """
    Run grad_check over the registered cases for several seeds.

    Returns:
        DataFrame with one row per (op, seed): op, seed, max_rel_error, passed
    """
    cases = GRAD_CASES if names is None else [c for c in GRAD_CASES if c.name in set(names)]
    if names is not None and len(cases) != len(set(names)):
        known = {c.name for c in GRAD_CASES}
        raise InvalidArgumentError(f"Unknown ops {sorted(set(names) - known)}. Known: {sorted(known)}")
    rows = []
    for case in cases:
        for seed in seeds:
            fn, inputs = case.build(np.random.default_rng(seed))
            err = grad_check(fn, inputs, eps=eps, seed=projection_seed(seed), dtype=dtype)
            rows.append({"op": case.name, "seed": int(seed), "max_rel_error": err, "passed": err < GRAD_TOLERANCE})
            logger.debug("%s seed %d: %.3e", case.name, seed, err)
    return pd.DataFrame(rows, columns=["op", "seed", "max_rel_error", "passed"])
