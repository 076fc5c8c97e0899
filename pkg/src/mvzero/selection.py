"""View selection: keep the most confidently classified views of a shape.

Views are ranked by the entropy of their per-view class distribution;
lower entropy means clearer semantics. The default mode keeps the
m_select smallest-entropy views. Two ablation modes are provided: "none"
keeps everything, and "diverse_decisions" greedily keeps low-entropy views
whose top-1 decisions differ from each other.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .embeddings import EmbeddingMatrix, ShapeRecord
from .errors import ZeroNormRow
from .scoring import LogitsVector, compute_logits, entropy_bits, softmax


class SelectionMode(str, Enum):
    ENTROPY_MIN = "entropy_min"
    NONE = "none"
    DIVERSE_DECISIONS = "diverse_decisions"


class PoolMode(str, Enum):
    MEAN = "mean"
    MAX = "max"


@dataclass
class SelectionConfig:
    m_total: int = 20
    m_select: int = 4
    mode: SelectionMode = SelectionMode.ENTROPY_MIN

    def __post_init__(self):
        self.mode = SelectionMode(self.mode)
        if not (1 <= self.m_select <= self.m_total):
            raise ValueError(
                f"need 1 <= m_select <= m_total, got {self.m_select}/{self.m_total}"
            )


@dataclass
class ViewScore:
    """Per-view trace: entropy in bits plus the view's own decision."""

    view_index: int
    entropy: float
    top1_class: int
    logits: LogitsVector


@dataclass
class Selection:
    """Selected view indices (ascending) plus any degenerate-input warnings."""

    indices: list[int]
    warnings: list[str] = field(default_factory=list)
    fallback_engaged: bool = False


def score_views(
    shape: ShapeRecord,
    views_matrix: EmbeddingMatrix,
    layer1_prompts: EmbeddingMatrix,
    temperature: float,
) -> list[ViewScore]:
    """Score every view of the shape, in original view order."""
    scores = []
    for local_idx, row in enumerate(shape.view_rows):
        logits = compute_logits(views_matrix.row(row), layer1_prompts, temperature)
        h = entropy_bits(softmax(logits))
        scores.append(
            ViewScore(
                view_index=local_idx,
                entropy=h,
                top1_class=logits.argmax(),
                logits=logits,
            )
        )
    return scores


def select_views(scores: list[ViewScore], config: SelectionConfig) -> Selection:
    """Pick view indices according to the configured mode.

    entropy_min keeps the m_select smallest entropies (ties broken by
    ascending view index); diverse_decisions additionally requires kept
    views to disagree in top-1 class, falling back to lowest-entropy
    leftovers when fewer distinct decisions exist. Output indices are
    sorted ascending. m_select larger than the score list clamps with a
    warning instead of failing, so one config can run across datasets
    with heterogeneous view counts.
    """
    if not scores:
        raise ValueError("scores must be non-empty")
    warnings = []
    m = config.m_select
    if m > len(scores):
        warnings.append(
            f"m_select={m} exceeds {len(scores)} available views; clamped"
        )
        m = len(scores)

    if config.mode is SelectionMode.NONE:
        return Selection(indices=[s.view_index for s in scores], warnings=warnings)

    by_entropy = sorted(scores, key=lambda s: (s.entropy, s.view_index))

    if config.mode is SelectionMode.ENTROPY_MIN:
        kept = by_entropy[:m]
        return Selection(
            indices=sorted(s.view_index for s in kept), warnings=warnings
        )

    # diverse_decisions: greedy ascending-entropy scan, one view per decision
    kept: list[ViewScore] = []
    seen_decisions: set[int] = set()
    for s in by_entropy:
        if len(kept) == m:
            break
        if s.top1_class not in seen_decisions:
            kept.append(s)
            seen_decisions.add(s.top1_class)
    fallback = False
    if len(kept) < m:
        fallback = True
        warnings.append(
            f"only {len(kept)} distinct decisions; filled remaining "
            f"{m - len(kept)} slots with lowest-entropy views"
        )
        kept_ids = {s.view_index for s in kept}
        for s in by_entropy:
            if len(kept) == m:
                break
            if s.view_index not in kept_ids:
                kept.append(s)
                kept_ids.add(s.view_index)
    return Selection(
        indices=sorted(s.view_index for s in kept),
        warnings=warnings,
        fallback_engaged=fallback,
    )


def pool_features(vectors: list[np.ndarray] | np.ndarray, mode: PoolMode | str) -> np.ndarray:
    """Element-wise mean or max of view vectors, re-normalized to unit norm.

    Implemented only to reproduce the feature-pooling ablation; the main
    pipeline fuses per-view predictions instead.
    """
    mode = PoolMode(mode)
    arr = np.asarray(vectors, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1:
        raise ValueError("need at least one vector of equal dims")
    pooled = arr.mean(axis=0) if mode is PoolMode.MEAN else arr.max(axis=0)
    norm = float(np.linalg.norm(pooled))
    if norm < 1e-8:
        raise ZeroNormRow(0)
    return (pooled / norm).astype(np.float32)
