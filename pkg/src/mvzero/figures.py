"""Figure rendering for the CLI report path.

Each report kind gets one PNG rendered next to its delimited output. The
evaluation core stays plot-free; only the CLI calls into this module.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .harness import EvalReport, GridCell, SweepCurve


def render_figure(obj, path: str | Path) -> None:
    """Render a report / sweep curve / ablation grid to an image file."""
    if isinstance(obj, EvalReport):
        fig = _eval_figure(obj)
    elif isinstance(obj, SweepCurve):
        fig = _sweep_figure(obj)
    elif isinstance(obj, list) and all(isinstance(c, GridCell) for c in obj):
        fig = _grid_figure(obj)
    else:
        raise TypeError(f"cannot render {type(obj).__name__}")
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _eval_figure(report: EvalReport):
    classes = list(report.per_class_accuracy)
    accs = [report.per_class_accuracy[c] for c in classes]
    width = max(6.0, 0.35 * len(classes) + 2.0)
    fig, ax = plt.subplots(figsize=(width, 4.0))
    ax.bar(range(len(classes)), accs, color="#4878cf")
    ax.axhline(report.overall_accuracy, color="#d65f5f", linestyle="--",
               label=f"overall {report.overall_accuracy:.3f}")
    ax.set_xticks(range(len(classes)))
    ax.set_xticklabels(classes, rotation=60, ha="right", fontsize=7)
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("accuracy")
    ax.set_title("Per-class accuracy")
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    return fig


def _sweep_figure(curve: SweepCurve):
    values = [p.value for p in curve.points]
    accs = [p.accuracy for p in curve.points]
    refined = [p.refined_count for p in curve.points]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(values, accs, marker="o", color="#4878cf", label="accuracy")
    ax.set_xlabel(curve.parameter)
    ax.set_ylabel("accuracy", color="#4878cf")
    ax2 = ax.twinx()
    ax2.plot(values, refined, marker="s", color="#6acc65", label="refined")
    ax2.set_ylabel("refined shapes", color="#6acc65")
    ax.set_title(f"Sensitivity to {curve.parameter}")
    fig.tight_layout()
    return fig


def _grid_figure(cells: list[GridCell]):
    labels = []
    accs = []
    for c in cells:
        sel = "sel" if c.selection_on else "no sel"
        hp = "hp" if c.hierarchical_on else "no hp"
        labels.append(f"{sel}\n{hp}")
        accs.append(c.report.overall_accuracy)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.bar(range(len(cells)), accs, color="#4878cf")
    ax.set_xticks(range(len(cells)))
    ax.set_xticklabels(labels, fontsize=8)
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("accuracy")
    ax.set_title("Module ablation")
    for i, a in enumerate(accs):
        ax.text(i, a + 0.01, f"{a:.3f}", ha="center", fontsize=8)
    fig.tight_layout()
    return fig
