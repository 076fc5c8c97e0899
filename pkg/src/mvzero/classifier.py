"""The per-shape decision procedure.

Layer 1 selects views, sums their temperature-scaled logits, and takes the
top class. When the maximum layer-1 probability falls below the confidence
threshold delta, the top-k classes become candidates and the shape is
re-matched against that candidate set's offline-generated prompts; the
layer-2 argmax replaces the answer.

The gate probability is the softmax of the per-view mean of the summed
logits (sum divided by the number of selected views), so delta keeps the
same calibration regardless of how many views are selected. Division by a
positive count preserves the argmax, so sum and mean agree on the decision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .bank import Layer2Entry, PromptBank, candidate_key, lookup_layer2
from .embeddings import EmbeddingMatrix, ShapeRecord
from .errors import CandidateMismatch, MissingPromptEntry
from .scoring import DEFAULT_TEMPERATURE, LogitsVector, compute_logits, softmax
from .selection import (
    PoolMode,
    Selection,
    SelectionConfig,
    ViewScore,
    pool_features,
    score_views,
    select_views,
)

DEFAULT_DELTA = 0.96
DEFAULT_TOP_K = 3


class Aggregation(str, Enum):
    SUM_LOGITS = "sum_logits"
    MEAN_POOL_FEATURES = "mean_pool_features"
    MAX_POOL_FEATURES = "max_pool_features"


@dataclass
class ClassifierConfig:
    delta: float = DEFAULT_DELTA
    top_k: int = DEFAULT_TOP_K
    temperature: float = DEFAULT_TEMPERATURE
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    hierarchical_enabled: bool = True
    aggregation: Aggregation = Aggregation.SUM_LOGITS

    def __post_init__(self):
        self.aggregation = Aggregation(self.aggregation)
        if not (0.0 <= self.delta <= 1.0):
            raise ValueError(f"delta must be in [0, 1], got {self.delta}")
        if self.top_k < 2:
            raise ValueError(f"top_k must be >= 2, got {self.top_k}")

    def to_dict(self) -> dict:
        return {
            "delta": self.delta,
            "top_k": self.top_k,
            "temperature": self.temperature,
            "selection": {
                "m_total": self.selection.m_total,
                "m_select": self.selection.m_select,
                "mode": self.selection.mode.value,
            },
            "hierarchical_enabled": self.hierarchical_enabled,
            "aggregation": self.aggregation.value,
        }


@dataclass
class PredictionRecord:
    """Full per-shape trace, serializable to one JSON line."""

    shape_id: str
    selected_views: list[int]
    view_scores: list[ViewScore]
    layer1_logits: LogitsVector
    layer1_probs: np.ndarray
    layer1_top1: int
    refined: bool = False
    candidates: Optional[list[str]] = None
    layer2_logits: Optional[list[float]] = None
    final_label: int = -1
    deferred_refinement: bool = False
    missing_key: Optional[str] = None
    warnings: list[str] = field(default_factory=list)
    # global row indices of the selected views; not serialized
    selected_rows: list[int] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "shape_id": self.shape_id,
            "selected_views": list(self.selected_views),
            "view_scores": [
                {
                    "view_index": s.view_index,
                    "entropy": s.entropy,
                    "top1_class": s.top1_class,
                    "logits": [float(v) for v in s.logits.values],
                }
                for s in self.view_scores
            ],
            "layer1_logits": [float(v) for v in self.layer1_logits.values],
            "layer1_probs": [float(v) for v in self.layer1_probs],
            "layer1_top1": self.layer1_top1,
            "refined": self.refined,
            "candidates": self.candidates,
            "layer2_logits": self.layer2_logits,
            "final_label": self.final_label,
            "deferred_refinement": self.deferred_refinement,
            "missing_key": self.missing_key,
            "warnings": list(self.warnings),
        }


def first_layer(
    shape: ShapeRecord,
    views_matrix: EmbeddingMatrix,
    bank: PromptBank,
    config: ClassifierConfig,
) -> PredictionRecord:
    """Score and select views, then aggregate into the layer-1 decision."""
    scores = score_views(shape, views_matrix, bank.layer1, config.temperature)
    selection = select_views(scores, config.selection)
    selected_rows = [shape.view_rows[i] for i in selection.indices]

    if config.aggregation is Aggregation.SUM_LOGITS:
        stacked = np.stack([scores[i].logits.values for i in selection.indices])
        summed = stacked.sum(axis=0)
        logits = LogitsVector(values=summed, temperature=config.temperature)
        probs = softmax(summed / len(selection.indices))
    else:
        pool = (
            PoolMode.MEAN
            if config.aggregation is Aggregation.MEAN_POOL_FEATURES
            else PoolMode.MAX
        )
        pooled = pool_features([views_matrix.row(r) for r in selected_rows], pool)
        logits = compute_logits(pooled, bank.layer1, config.temperature)
        probs = softmax(logits)

    top1 = logits.argmax()
    return PredictionRecord(
        shape_id=shape.shape_id,
        selected_views=selection.indices,
        view_scores=scores,
        layer1_logits=logits,
        layer1_probs=probs.values,
        layer1_top1=top1,
        final_label=top1,
        warnings=selection.warnings,
        selected_rows=selected_rows,
    )


def confidence_gate(record: PredictionRecord, config: ClassifierConfig) -> bool:
    """True iff the shape needs layer-2 refinement."""
    if not config.hierarchical_enabled:
        return False
    return float(np.max(record.layer1_probs)) < config.delta


def top_k_candidates(record: PredictionRecord, bank: PromptBank, k: int) -> list[str]:
    """The k classes with the largest layer-1 logits, descending score,
    exact ties broken by ascending class index. Contains the top-1 by
    construction."""
    if k > bank.num_classes:
        raise ValueError(f"top_k={k} exceeds {bank.num_classes} classes")
    values = record.layer1_logits.values
    order = sorted(range(len(values)), key=lambda j: (-values[j], j))
    return [bank.classes[j] for j in order[:k]]


def second_layer(
    record: PredictionRecord,
    views_matrix: EmbeddingMatrix,
    entry: Layer2Entry,
    bank: PromptBank,
    config: ClassifierConfig,
) -> PredictionRecord:
    """Re-match the selected views against the candidate set's prompts."""
    if record.candidates is None or set(entry.candidate_classes) != set(record.candidates):
        raise CandidateMismatch(
            f"entry classes {entry.candidate_classes} != record candidates "
            f"{record.candidates}"
        )
    sums = np.zeros(entry.embeddings.rows, dtype=np.float64)
    for row in record.selected_rows:
        logits = compute_logits(
            views_matrix.row(row), entry.embeddings, config.temperature
        )
        sums += logits.values

    # order results by the record's candidate list so the trace lines up
    by_class = dict(zip(entry.candidate_classes, sums.tolist()))
    aligned = [by_class[c] for c in record.candidates]
    best = min(
        range(len(record.candidates)),
        key=lambda j: (-aligned[j], bank.class_index[record.candidates[j]]),
    )
    record.layer2_logits = aligned
    record.final_label = bank.class_index[record.candidates[best]]
    record.refined = True
    return record


def classify_shape(
    shape: ShapeRecord,
    views_matrix: EmbeddingMatrix,
    bank: PromptBank,
    config: ClassifierConfig,
) -> PredictionRecord:
    """Run the whole pipeline for one shape.

    A missing layer-2 entry does not fail the shape: the record keeps the
    layer-1 answer with deferred_refinement=True and carries the candidate
    key so the caller can queue offline prompt generation.
    """
    record = first_layer(shape, views_matrix, bank, config)
    if not confidence_gate(record, config):
        return record
    record.candidates = top_k_candidates(record, bank, config.top_k)
    try:
        entry = lookup_layer2(record.candidates, bank)
    except MissingPromptEntry as miss:
        record.deferred_refinement = True
        record.missing_key = miss.key
        return record
    return second_layer(record, views_matrix, entry, bank, config)


def record_to_json(record: PredictionRecord) -> str:
    import json

    return json.dumps(record.to_dict(), sort_keys=True)
