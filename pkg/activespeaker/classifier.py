"""
Frame-level speaking classifier and its loss.
"""

import numpy as np

from . import functional as F
from .exceptions import InvalidArgumentError
from .nn import Linear, Module
from .tensor import Tensor, as_tensor

PROB_CLAMP = 1e-7


class Classifier(Module):
    """Linear(256 -> 2) followed by a per-frame softmax; the speaking class is index 1."""

    def __init__(self, in_features: int, rng: np.random.Generator):
        super().__init__()
        self.fc = Linear(in_features, 2, rng)

    def logits(self, F_av) -> Tensor:
        return self.fc(as_tensor(F_av))

    def forward(self, F_av) -> Tensor:
        """
        Args:
            F_av: Joint sequence of shape (T, 256) or (N, T, 256)

        Returns:
            Speaking probabilities of shape (T,) or (N, T)
        """
        probs = F.softmax(self.logits(F_av), axis=-1)
        return probs[..., 1]


def predict(F_av, classifier: Classifier) -> Tensor:
    return classifier(F_av)


def check_labels(labels) -> np.ndarray:
    """Return labels as a 0/1 array or raise InvalidArgumentError."""
    y = np.asarray(labels)
    if y.size and not np.isin(y, (0, 1)).all():
        raise InvalidArgumentError(f"Labels must be binary, got values {sorted(set(np.unique(y).tolist()))[:5]}")
    return y


def frame_cross_entropy(s, y, mask=None) -> Tensor:
    """
    Mean negative log-likelihood of the labels under the speaking probabilities.

    Probabilities are clamped to [1e-7, 1 - 1e-7]. For batched input the loss
    is averaged over the valid frames of each clip and then over clips.

    Args:
        s: Speaking probabilities, shape (T,) or (N, T)
        y: Binary labels of the same shape
        mask: Optional 0/1 validity mask of the same shape

    Returns:
        Scalar loss tensor (call .item() for a float)

    Raises:
        InvalidArgumentError: If s and y differ in shape or y is not binary
    """
    s = as_tensor(s)
    y = check_labels(y)
    if y.shape != s.shape:
        raise InvalidArgumentError(f"Scores {s.shape} and labels {y.shape} differ in length")
    return F.binary_cross_entropy(s, y, mask=mask, clamp_eps=PROB_CLAMP)
