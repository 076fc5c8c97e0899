"""Numerical kernels: similarity logits, softmax, and Shannon entropy.

Logits are temperature-scaled cosine similarities between a unit-norm view
vector and unit-norm prompt rows. Probabilities are the softmax of those
logits and entropy is taken in base 2. Reductions use math.fsum so results
are exactly invariant under permutation of the class axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .embeddings import EmbeddingMatrix
from .errors import DimMismatch, NonPositiveTemperature

DEFAULT_TEMPERATURE = 100.0


@dataclass
class LogitsVector:
    """K per-class similarity scores, temperature applied at construction."""

    values: np.ndarray  # float64, shape (K,)
    temperature: float

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1:
            raise ValueError("logits must be a 1-D vector")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("logits must be finite")
        if self.temperature <= 0:
            raise NonPositiveTemperature(self.temperature)

    def __len__(self) -> int:
        return len(self.values)

    def argmax(self) -> int:
        # np.argmax returns the lowest index on exact ties, which is the
        # tie rule used everywhere in this package.
        return int(np.argmax(self.values))


@dataclass
class ProbabilityVector:
    """K class probabilities; sums to 1 within 1e-9."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1:
            raise ValueError("probabilities must be a 1-D vector")
        if np.any(self.values < 0) or np.any(self.values > 1):
            raise ValueError("probabilities must lie in [0, 1]")
        if abs(math.fsum(self.values.tolist()) - 1.0) > 1e-9:
            raise ValueError("probabilities must sum to 1 within 1e-9")

    def __len__(self) -> int:
        return len(self.values)

    def max(self) -> float:
        return float(np.max(self.values))


def compute_logits(
    view: np.ndarray,
    prompts: EmbeddingMatrix,
    temperature: float = DEFAULT_TEMPERATURE,
) -> LogitsVector:
    """values[j] = temperature * dot(view, prompts.row(j)), accumulated in f64."""
    if temperature <= 0:
        raise NonPositiveTemperature(temperature)
    view64 = np.asarray(view, dtype=np.float64)
    if view64.ndim != 1:
        raise DimMismatch(f"view must be 1-D, got shape {view64.shape}")
    if view64.shape[0] != prompts.cols:
        raise DimMismatch(
            f"view dim {view64.shape[0]} != prompt dim {prompts.cols}"
        )
    scores = prompts.data.astype(np.float64) @ view64
    return LogitsVector(values=temperature * scores, temperature=temperature)


def softmax(logits: LogitsVector | np.ndarray) -> ProbabilityVector:
    """Exponential normalization with max-subtraction; overflow-safe."""
    values = logits.values if isinstance(logits, LogitsVector) else np.asarray(logits, dtype=np.float64)
    shifted = values - np.max(values)
    exps = np.exp(shifted)
    total = math.fsum(exps.tolist())
    return ProbabilityVector(values=exps / total)


def entropy_bits(p: ProbabilityVector | np.ndarray) -> float:
    """Shannon entropy -sum p_j log2 p_j with 0 * log2 0 := 0, in [0, log2 K]."""
    values = p.values if isinstance(p, ProbabilityVector) else np.asarray(p, dtype=np.float64)
    terms = [float(v) * math.log2(float(v)) for v in values if v > 0.0]
    h = -math.fsum(terms)
    return h if h > 0.0 else 0.0


def view_entropy(
    view: np.ndarray,
    prompts: EmbeddingMatrix,
    temperature: float = DEFAULT_TEMPERATURE,
) -> float:
    """Entropy of the softmax class distribution of one view's logits."""
    return entropy_bits(softmax(compute_logits(view, prompts, temperature)))
