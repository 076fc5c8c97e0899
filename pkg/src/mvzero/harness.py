"""Batch evaluation: accuracy reports, ablation grids, sensitivity sweeps,
per-view statistics, and decision-variance histograms.

Evaluation is deterministic and order-independent over shapes: records are
merged in manifest order, so running with one thread or many produces
byte-identical reports. Wall-clock timing lives only on the report object
and is excluded from every serialized payload.
"""

from __future__ import annotations

import dataclasses
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

from .bank import PromptBank
from .classifier import (
    Aggregation,
    ClassifierConfig,
    PredictionRecord,
    classify_shape,
    first_layer,
)
from .embeddings import DatasetManifest, EmbeddingMatrix
from .errors import EmptyDataset, InvalidSweepValue, MissingLabel
from .selection import SelectionConfig, SelectionMode


@dataclass
class EvalReport:
    total: int
    correct: int
    overall_accuracy: float
    per_class_accuracy: dict[str, float]
    per_class_counts: dict[str, dict[str, int]]
    refined_count: int
    corrected_count: int
    broken_count: int
    deferred_count: int
    config_echo: dict
    runtime_ms: float = 0.0
    records: list[PredictionRecord] = field(default_factory=list, repr=False)

    def payload(self) -> dict:
        """Serializable content; excludes runtime (sidecar log only) and
        the raw per-shape records (those go to the trace file)."""
        return {
            "total": self.total,
            "correct": self.correct,
            "overall_accuracy": self.overall_accuracy,
            "per_class_accuracy": self.per_class_accuracy,
            "per_class_counts": self.per_class_counts,
            "refined_count": self.refined_count,
            "corrected_count": self.corrected_count,
            "broken_count": self.broken_count,
            "deferred_count": self.deferred_count,
            "config_echo": self.config_echo,
        }


@dataclass
class SweepPoint:
    value: float | int
    accuracy: float
    refined_count: int
    report: EvalReport


@dataclass
class SweepCurve:
    parameter: str
    points: list[SweepPoint]


@dataclass
class GridCell:
    selection_on: bool
    hierarchical_on: bool
    report: EvalReport


def _run_records(
    manifest: DatasetManifest,
    views: EmbeddingMatrix,
    bank: PromptBank,
    config: ClassifierConfig,
    threads: int = 1,
) -> list[PredictionRecord]:
    shapes = manifest.shapes
    if threads <= 1:
        return [classify_shape(s, views, bank, config) for s in shapes]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda s: classify_shape(s, views, bank, config), shapes))


def evaluate(
    manifest: DatasetManifest,
    views: EmbeddingMatrix,
    bank: PromptBank,
    config: ClassifierConfig,
    threads: int = 1,
) -> EvalReport:
    """Classify every labelled shape and aggregate counts."""
    if not manifest.shapes:
        raise EmptyDataset("manifest contains no shapes")
    for shape in manifest.shapes:
        if shape.label is None:
            raise MissingLabel(shape.shape_id)

    start = time.perf_counter()
    records = _run_records(manifest, views, bank, config, threads)

    per_class = {c: {"total": 0, "correct": 0} for c in manifest.classes}
    correct = refined = corrected = broken = deferred = 0
    for shape, record in zip(manifest.shapes, records):
        truth = manifest.class_index[shape.label]
        counts = per_class[shape.label]
        counts["total"] += 1
        final_ok = record.final_label == truth
        if final_ok:
            correct += 1
            counts["correct"] += 1
        if record.deferred_refinement:
            deferred += 1
        if record.refined:
            refined += 1
            layer1_ok = record.layer1_top1 == truth
            if final_ok and not layer1_ok:
                corrected += 1
            elif layer1_ok and not final_ok:
                broken += 1

    total = len(records)
    report = EvalReport(
        total=total,
        correct=correct,
        overall_accuracy=correct / total,
        per_class_accuracy={
            c: (v["correct"] / v["total"] if v["total"] else 0.0)
            for c, v in per_class.items()
        },
        per_class_counts=per_class,
        refined_count=refined,
        corrected_count=corrected,
        broken_count=broken,
        deferred_count=deferred,
        config_echo=config.to_dict(),
        runtime_ms=(time.perf_counter() - start) * 1000.0,
        records=records,
    )
    return report


def ablation_grid(
    manifest: DatasetManifest,
    views: EmbeddingMatrix,
    bank: PromptBank,
    base_config: ClassifierConfig,
    threads: int = 1,
) -> list[GridCell]:
    """The four {selection off/on} x {hierarchical off/on} runs, everything
    else held equal."""
    cells = []
    for selection_on in (False, True):
        for hierarchical_on in (False, True):
            selection = (
                base_config.selection
                if selection_on
                else SelectionConfig(
                    m_total=base_config.selection.m_total,
                    m_select=base_config.selection.m_select,
                    mode=SelectionMode.NONE,
                )
            )
            config = dataclasses.replace(
                base_config,
                selection=selection,
                hierarchical_enabled=hierarchical_on,
            )
            cells.append(
                GridCell(
                    selection_on=selection_on,
                    hierarchical_on=hierarchical_on,
                    report=evaluate(manifest, views, bank, config, threads),
                )
            )
    return cells


SWEEP_PARAMETERS = ("delta", "m_select", "top_k", "temperature")


def sweep(
    manifest: DatasetManifest,
    views: EmbeddingMatrix,
    bank: PromptBank,
    base_config: ClassifierConfig,
    parameter: str,
    values: list[float],
    threads: int = 1,
) -> SweepCurve:
    """One evaluation per parameter value, points sorted by value."""
    if parameter not in SWEEP_PARAMETERS:
        raise InvalidSweepValue(f"unknown sweep parameter {parameter!r}")
    if not values:
        raise InvalidSweepValue("values must be non-empty")

    points = []
    for value in sorted(values):
        try:
            if parameter == "delta":
                config = dataclasses.replace(base_config, delta=float(value))
            elif parameter == "temperature":
                if value <= 0:
                    raise ValueError("temperature must be > 0")
                config = dataclasses.replace(base_config, temperature=float(value))
            elif parameter == "top_k":
                config = dataclasses.replace(base_config, top_k=int(value))
            else:  # m_select
                selection = SelectionConfig(
                    m_total=base_config.selection.m_total,
                    m_select=int(value),
                    mode=base_config.selection.mode,
                )
                config = dataclasses.replace(base_config, selection=selection)
        except ValueError as exc:  # config constructors validate ranges
            raise InvalidSweepValue(f"{parameter}={value}: {exc}") from exc
        report = evaluate(manifest, views, bank, config, threads)
        points.append(
            SweepPoint(
                value=value,
                accuracy=report.overall_accuracy,
                refined_count=report.refined_count,
                report=report,
            )
        )
    return SweepCurve(parameter=parameter, points=points)


def per_view_accuracy(
    manifest: DatasetManifest,
    views: EmbeddingMatrix,
    bank: PromptBank,
    config: ClassifierConfig,
) -> tuple[float, float]:
    """Fraction of individual views whose own top-1 matches the shape label,
    over all views and over selected views."""
    all_total = all_correct = sel_total = sel_correct = 0
    for shape in manifest.shapes:
        if shape.label is None:
            raise MissingLabel(shape.shape_id)
        truth = manifest.class_index[shape.label]
        record = first_layer(shape, views, bank, config)
        selected = set(record.selected_views)
        for score in record.view_scores:
            ok = score.top1_class == truth
            all_total += 1
            all_correct += ok
            if score.view_index in selected:
                sel_total += 1
                sel_correct += ok
    if all_total == 0:
        raise EmptyDataset("no views to score")
    return all_correct / all_total, sel_correct / sel_total


def decision_variance(
    manifest: DatasetManifest,
    views: EmbeddingMatrix,
    bank: PromptBank,
    config: ClassifierConfig,
) -> dict[int, int]:
    """Histogram over shapes of the number of distinct per-view decisions
    among the selected views."""
    histogram: dict[int, int] = {}
    for shape in manifest.shapes:
        record = first_layer(shape, views, bank, config)
        selected = set(record.selected_views)
        decisions = {
            s.top1_class for s in record.view_scores if s.view_index in selected
        }
        histogram[len(decisions)] = histogram.get(len(decisions), 0) + 1
    return dict(sorted(histogram.items()))


# ---------------------------------------------------------------------------
# Report emission
# ---------------------------------------------------------------------------

def _check(condition: bool, message: str):
    if not condition:
        raise ValueError(message)


def emit_report(obj, format: str = "json") -> str:
    """Serialize a report, sweep curve, or ablation grid deterministically."""
    _check(format in ("json", "csv", "md"), f"unknown format {format!r}")
    if isinstance(obj, EvalReport):
        return _emit_eval(obj, format)
    if isinstance(obj, SweepCurve):
        return _emit_sweep(obj, format)
    if isinstance(obj, list) and all(isinstance(c, GridCell) for c in obj):
        return _emit_grid(obj, format)
    raise TypeError(f"cannot emit {type(obj).__name__}")


def _emit_eval(report: EvalReport, format: str) -> str:
    if format == "json":
        return json.dumps(report.payload(), sort_keys=True, indent=2) + "\n"
    if format == "csv":
        lines = ["key,value"]
        payload = report.payload()
        for key in (
            "total",
            "correct",
            "overall_accuracy",
            "refined_count",
            "corrected_count",
            "broken_count",
            "deferred_count",
        ):
            lines.append(f"{key},{payload[key]!r}" if isinstance(payload[key], float)
                         else f"{key},{payload[key]}")
        for cls, acc in report.per_class_accuracy.items():
            lines.append(f"per_class.{cls},{acc!r}")
        return "\n".join(lines) + "\n"
    # markdown
    lines = [
        "| metric | value |",
        "| --- | --- |",
        f"| overall accuracy | {report.overall_accuracy:.4f} |",
        f"| shapes | {report.total} |",
        f"| refined | {report.refined_count} |",
        f"| corrected (wrong-to-right) | {report.corrected_count} |",
        f"| broken (right-to-wrong) | {report.broken_count} |",
        f"| deferred (missing layer-2 entry) | {report.deferred_count} |",
        "",
        "| class | accuracy | correct/total |",
        "| --- | --- | --- |",
    ]
    for cls, acc in report.per_class_accuracy.items():
        counts = report.per_class_counts[cls]
        lines.append(f"| {cls} | {acc:.4f} | {counts['correct']}/{counts['total']} |")
    return "\n".join(lines) + "\n"


def _emit_sweep(curve: SweepCurve, format: str) -> str:
    if format == "json":
        doc = {
            "parameter": curve.parameter,
            "points": [
                {
                    "value": p.value,
                    "accuracy": p.accuracy,
                    "refined_count": p.refined_count,
                }
                for p in curve.points
            ],
        }
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"
    if format == "csv":
        lines = ["value,accuracy,refined_count"]
        for p in curve.points:
            lines.append(f"{p.value},{p.accuracy!r},{p.refined_count}")
        return "\n".join(lines) + "\n"
    lines = [
        f"| {curve.parameter} | accuracy | refined |",
        "| --- | --- | --- |",
    ]
    for p in curve.points:
        lines.append(f"| {p.value} | {p.accuracy:.4f} | {p.refined_count} |")
    return "\n".join(lines) + "\n"


def _emit_grid(cells: list[GridCell], format: str) -> str:
    if format == "json":
        doc = [
            {
                "view_selection": c.selection_on,
                "hierarchical_prompts": c.hierarchical_on,
                "accuracy": c.report.overall_accuracy,
                "refined_count": c.report.refined_count,
                "corrected_count": c.report.corrected_count,
                "broken_count": c.report.broken_count,
            }
            for c in cells
        ]
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"
    if format == "csv":
        lines = ["view_selection,hierarchical_prompts,accuracy,refined_count"]
        for c in cells:
            lines.append(
                f"{int(c.selection_on)},{int(c.hierarchical_on)},"
                f"{c.report.overall_accuracy!r},{c.report.refined_count}"
            )
        return "\n".join(lines) + "\n"
    lines = [
        "| View selection | Hierarchical prompts | Accuracy |",
        "| --- | --- | --- |",
    ]
    for c in cells:
        sel = "✓" if c.selection_on else "✗"
        hp = "✓" if c.hierarchical_on else "✗"
        lines.append(f"| {sel} | {hp} | {c.report.overall_accuracy:.4f} |")
    return "\n".join(lines) + "\n"
