"""
Adam optimizer and the per-epoch learning-rate schedule.
"""

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .config import TrainConfig
from .exceptions import InvalidArgumentError
from .nn import Parameter

BETAS = (0.9, 0.999)
EPS = 1e-8


@dataclass
class AdamMoments:
    m: List[np.ndarray]
    v: List[np.ndarray]
    t: int = 0

    @classmethod
    def zeros_like(cls, params: Sequence[np.ndarray]) -> "AdamMoments":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params], 0)


def adam_step(params: Sequence[np.ndarray], grads: Sequence[Optional[np.ndarray]], moments: AdamMoments,
              lr: float, beta1: float = BETAS[0], beta2: float = BETAS[1],
              eps: float = EPS) -> Tuple[List[np.ndarray], AdamMoments]:
    """
    One bias-corrected Adam update.

    Pure: the inputs are not modified. A None gradient leaves its parameter
    and moments untouched.

    Returns:
        (updated parameters, updated moments)

    Raises:
        InvalidArgumentError: If a gradient's shape differs from its parameter's
    """
    if not (len(params) == len(grads) == len(moments.m) == len(moments.v)):
        raise InvalidArgumentError("params, grads and moments must have the same length")
    t = moments.t + 1
    new_params, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, moments.m, moments.v):
        if g is None:
            new_params.append(p)
            new_m.append(m)
            new_v.append(v)
            continue
        g = np.asarray(g)
        if g.shape != p.shape:
            raise InvalidArgumentError(f"Gradient shape {g.shape} does not match parameter shape {p.shape}")
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1 ** t)
        v_hat = v / (1.0 - beta2 ** t)
        new_params.append((p - lr * m_hat / (np.sqrt(v_hat) + eps)).astype(p.dtype))
        new_m.append(m.astype(p.dtype))
        new_v.append(v.astype(p.dtype))
    return new_params, AdamMoments(new_m, new_v, t)


class Adam:
    """Adam over a fixed list of Parameters, reading each parameter's .grad."""

    def __init__(self, params: Sequence[Parameter], lr: float = 1e-4, betas: Tuple[float, float] = BETAS,
                 eps: float = EPS):
        if lr <= 0:
            raise InvalidArgumentError(f"Learning rate must be positive, got {lr}")
        self.params = list(params)
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.moments = AdamMoments.zeros_like([p.data for p in self.params])

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self) -> None:
        updated, self.moments = adam_step(
            [p.data for p in self.params], [p.grad for p in self.params], self.moments,
            self.lr, self.betas[0], self.betas[1], self.eps,
        )
        for p, data in zip(self.params, updated):
            p.data = data

    def state_dict(self) -> Dict[str, np.ndarray]:
        state = {"t": np.array(self.moments.t, dtype=np.float64)}
        for i, (m, v) in enumerate(zip(self.moments.m, self.moments.v)):
            state[f"m.{i}"] = m.copy()
            state[f"v.{i}"] = v.copy()
        return state

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        n = len(self.params)
        try:
            m = [np.asarray(state[f"m.{i}"], dtype=self.params[i].dtype).copy() for i in range(n)]
            v = [np.asarray(state[f"v.{i}"], dtype=self.params[i].dtype).copy() for i in range(n)]
            t = int(np.asarray(state["t"]).reshape(-1)[0])
        except KeyError as e:
            raise InvalidArgumentError(f"Optimizer state is missing {e}")
        self.moments = AdamMoments(m, v, t)


def lr_at_epoch(cfg: TrainConfig, epoch: int) -> float:
    """lr0 * decay^epoch; epoch 0 uses lr0."""
    if epoch < 0:
        raise InvalidArgumentError(f"epoch must be >= 0, got {epoch}")
    return cfg.lr0 * cfg.lr_decay_per_epoch ** epoch
