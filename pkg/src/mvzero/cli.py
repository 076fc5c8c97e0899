"""Command-line interface.

Subcommands: classify, eval, ablate, sweep, synth, validate,
prompts-missing. Flag defaults reproduce the method's reference
configuration (delta 0.96, top-k 3, m-select 4 of 20 views, temperature
100), so a zero-flag run is the canonical setting.

Exit codes: 0 success, 1 usage error, 2 data/format error, 3 a required
layer-2 prompt entry was missing and --strict was set.
"""

from __future__ import annotations

import argparse
import datetime
import os
import sys
from pathlib import Path

from .bank import load_bank, validate_bank
from .classifier import (
    Aggregation,
    ClassifierConfig,
    record_to_json,
)
from .embeddings import load_dataset
from .errors import MvzeroError
from .harness import (
    SWEEP_PARAMETERS,
    ablation_grid,
    emit_report,
    evaluate,
    sweep,
)
from .selection import SelectionConfig, SelectionMode
from .synthetic import SyntheticSpec, write_synthetic_dataset

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_MISSING_PROMPTS = 3


class _Parser(argparse.ArgumentParser):
    """argparse that exits 1 (not 2) on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _add_pipeline_flags(parser: argparse.ArgumentParser, with_out: bool = True):
    parser.add_argument("--manifest", required=True, help="dataset manifest JSON")
    parser.add_argument("--bank", required=True, help="prompt bank JSON")
    parser.add_argument(
        "--delta", type=float, default=0.96,
        help="confidence threshold below which layer-2 refinement runs "
             "(default 0.96, the reference setting)",
    )
    parser.add_argument(
        "--top-k", type=int, default=3,
        help="number of candidate classes for refinement (default 3, the "
             "best-performing reference value)",
    )
    parser.add_argument(
        "--m-select", type=int, default=4,
        help="views kept by selection (default 4 of 20, the reference setting)",
    )
    parser.add_argument(
        "--temperature", type=float, default=100.0,
        help="logit scale applied to cosine similarities (default 100, the "
             "conventional scale of contrastive encoders)",
    )
    parser.add_argument(
        "--selection", default="entropy_min",
        choices=[m.value for m in SelectionMode],
        help="view selection mode (default entropy_min; 'none' keeps all "
             "views; 'diverse_decisions' is the diversity ablation)",
    )
    parser.add_argument(
        "--aggregation", default="sum_logits",
        choices=[a.value for a in Aggregation],
        help="multi-view aggregation (default sum_logits; the pooling modes "
             "reproduce the feature-pooling ablation)",
    )
    parser.add_argument(
        "--no-hierarchical", action="store_true",
        help="disable layer-2 refinement entirely",
    )
    parser.add_argument(
        "--threads", type=int, default=None,
        help="worker threads (default: MVZERO_THREADS or available "
             "parallelism; results are identical for any value)",
    )
    if with_out:
        parser.add_argument("--out", default=None, help="output path (default stdout)")


def _add_figure_flags(parser: argparse.ArgumentParser):
    parser.add_argument(
        "--fig", default=None,
        help="render a figure to this path (default: next to --out as .png)",
    )
    parser.add_argument(
        "--no-fig", action="store_true", help="do not render a figure"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mvzero", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", help="per-shape prediction trace (JSON lines)")
    _add_pipeline_flags(p)
    p.add_argument("--strict", action="store_true",
                   help="exit 3 if any shape needed a missing layer-2 entry")

    p = sub.add_parser("eval", help="accuracy report over a labelled dataset")
    _add_pipeline_flags(p)
    p.add_argument("--format", default="json", choices=["json", "csv", "md"])
    p.add_argument("--strict", action="store_true",
                   help="exit 3 if any shape needed a missing layer-2 entry")
    _add_figure_flags(p)

    p = sub.add_parser("ablate", help="{selection off/on} x {hierarchical off/on} grid")
    _add_pipeline_flags(p)
    p.add_argument("--format", default="md", choices=["json", "csv", "md"])
    _add_figure_flags(p)

    p = sub.add_parser("sweep", help="sensitivity sweep over one parameter")
    _add_pipeline_flags(p)
    p.add_argument("--param", required=True, choices=list(SWEEP_PARAMETERS))
    p.add_argument("--values", required=True,
                   help="comma-separated values, e.g. 0,0.5,0.96,1.0")
    p.add_argument("--format", default="csv", choices=["json", "csv", "md"])
    _add_figure_flags(p)

    p = sub.add_parser("synth", help="write a seed-deterministic synthetic fixture")
    p.add_argument("--classes", type=int, default=10, help="class count (default 10)")
    p.add_argument("--dim", type=int, default=64, help="embedding dim (default 64)")
    p.add_argument("--shapes", type=int, default=50,
                   help="shapes per class (default 50)")
    p.add_argument("--views", type=int, default=20,
                   help="views per shape (default 20, the reference total)")
    p.add_argument("--clean", type=int, default=4,
                   help="clean views per shape (default 4, matching the "
                        "reference selection size)")
    p.add_argument("--sigma", type=float, default=0.01,
                   help="view noise level (default 0.01)")
    p.add_argument("--seed", type=int, default=7, help="RNG seed (default 7)")
    p.add_argument("--mode", default="wrong_class_leak",
                   choices=["wrong_class_leak", "uniform_mixture"],
                   help="ambiguous-view construction (default wrong_class_leak)")
    p.add_argument("--candidate-sizes", default="2,3,4",
                   help="candidate-set sizes to pre-generate layer-2 entries "
                        "for (default 2,3,4)")
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("validate", help="check a manifest or bank file")
    p.add_argument("--manifest", default=None)
    p.add_argument("--bank", default=None)

    p = sub.add_parser(
        "prompts-missing",
        help="candidate keys the dataset needs but the bank lacks "
             "(feeds offline prompt generation)",
    )
    _add_pipeline_flags(p)

    return parser


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _thread_count(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("MVZERO_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            sys.stderr.write(f"ignoring non-numeric MVZERO_THREADS={env!r}\n")
    return os.cpu_count() or 1


def _load_inputs(args):
    manifest, views = load_dataset(args.manifest)
    bank = load_bank(args.bank)
    max_views = max(len(s.view_rows) for s in manifest.shapes) if manifest.shapes else 1
    selection = SelectionConfig(
        m_total=max(args.m_select, max_views),
        m_select=args.m_select,
        mode=args.selection,
    )
    config = ClassifierConfig(
        delta=args.delta,
        top_k=args.top_k,
        temperature=args.temperature,
        selection=selection,
        hierarchical_enabled=not args.no_hierarchical,
        aggregation=args.aggregation,
    )
    return manifest, views, bank, config


def _write_text(text: str, out: str | None):
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _log_runtime(out: str | None, label: str, runtime_ms: float):
    """Timing goes to a sidecar log, never into report payloads."""
    stamp = datetime.datetime.now().isoformat(timespec="seconds")
    line = f"{stamp} {label} runtime_ms={runtime_ms:.1f}\n"
    if out is None:
        sys.stderr.write(line)
    else:
        with open(Path(out).with_suffix(".log"), "a", encoding="utf-8") as fh:
            fh.write(line)


def _maybe_figure(obj, args):
    if args.no_fig:
        return
    target = args.fig
    if target is None and args.out is not None:
        target = str(Path(args.out).with_suffix(".png"))
    if target is None:
        return
    from .figures import render_figure

    render_figure(obj, target)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_classify(args) -> int:
    manifest, views, bank, config = _load_inputs(args)
    from .classifier import classify_shape

    lines = []
    deferred = 0
    for shape in manifest.shapes:
        record = classify_shape(shape, views, bank, config)
        deferred += record.deferred_refinement
        lines.append(record_to_json(record))
    _write_text("\n".join(lines) + "\n", args.out)
    print(f"classified {len(lines)} shapes ({deferred} deferred)")
    if args.strict and deferred:
        sys.stderr.write(f"{deferred} shapes lacked layer-2 entries (--strict)\n")
        return EXIT_MISSING_PROMPTS
    return EXIT_OK


def cmd_eval(args) -> int:
    manifest, views, bank, config = _load_inputs(args)
    report = evaluate(manifest, views, bank, config, threads=_thread_count(args))
    _write_text(emit_report(report, args.format), args.out)
    _log_runtime(args.out, "eval", report.runtime_ms)
    _maybe_figure(report, args)
    print(f"accuracy {report.overall_accuracy}")
    if args.strict and report.deferred_count:
        sys.stderr.write(
            f"{report.deferred_count} shapes lacked layer-2 entries (--strict)\n"
        )
        return EXIT_MISSING_PROMPTS
    return EXIT_OK


def cmd_ablate(args) -> int:
    manifest, views, bank, config = _load_inputs(args)
    cells = ablation_grid(manifest, views, bank, config, threads=_thread_count(args))
    _write_text(emit_report(cells, args.format), args.out)
    total_ms = sum(c.report.runtime_ms for c in cells)
    _log_runtime(args.out, "ablate", total_ms)
    _maybe_figure(cells, args)
    for cell in cells:
        sel = "on" if cell.selection_on else "off"
        hp = "on" if cell.hierarchical_on else "off"
        print(f"selection={sel} hierarchical={hp} accuracy {cell.report.overall_accuracy}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    manifest, views, bank, config = _load_inputs(args)
    raw = [v for v in args.values.split(",") if v.strip()]
    if args.param in ("m_select", "top_k"):
        values = [int(v) for v in raw]
    else:
        values = [float(v) for v in raw]
    curve = sweep(manifest, views, bank, config, args.param, values,
                  threads=_thread_count(args))
    _write_text(emit_report(curve, args.format), args.out)
    total_ms = sum(p.report.runtime_ms for p in curve.points)
    _log_runtime(args.out, f"sweep:{args.param}", total_ms)
    _maybe_figure(curve, args)
    for p in curve.points:
        print(f"{args.param}={p.value} accuracy {p.accuracy} refined {p.refined_count}")
    return EXIT_OK


def cmd_synth(args) -> int:
    sizes = tuple(int(v) for v in args.candidate_sizes.split(",") if v.strip())
    spec = SyntheticSpec(
        num_classes=args.classes,
        dim=args.dim,
        shapes_per_class=args.shapes,
        views_per_shape=args.views,
        clean_views=args.clean,
        noise_sigma=args.sigma,
        ambiguous_view_mode=args.mode,
        seed=args.seed,
        candidate_sizes=sizes,
    )
    paths = write_synthetic_dataset(spec, args.out_dir)
    for name, path in paths.items():
        print(f"{name}: {path}")
    return EXIT_OK


def cmd_validate(args) -> int:
    if args.manifest is None and args.bank is None:
        sys.stderr.write("validate: need --manifest and/or --bank\n")
        return EXIT_USAGE
    findings = []
    if args.manifest is not None:
        load_dataset(args.manifest)  # raises on any violated invariant
        print(f"manifest {args.manifest}: OK")
    if args.bank is not None:
        bank = load_bank(args.bank)
        findings = validate_bank(bank)
        for f in findings:
            print(str(f))
        print(f"bank {args.bank}: {len(findings)} findings")
    return EXIT_DATA if findings else EXIT_OK


def cmd_prompts_missing(args) -> int:
    manifest, views, bank, config = _load_inputs(args)
    from .classifier import classify_shape

    keys = set()
    for shape in manifest.shapes:
        record = classify_shape(shape, views, bank, config)
        if record.missing_key is not None:
            keys.add(record.missing_key)
    text = "".join(k + "\n" for k in sorted(keys))
    _write_text(text, args.out)
    print(f"{len(keys)} candidate keys missing from bank")
    return EXIT_OK


_COMMANDS = {
    "classify": cmd_classify,
    "eval": cmd_eval,
    "ablate": cmd_ablate,
    "sweep": cmd_sweep,
    "synth": cmd_synth,
    "validate": cmd_validate,
    "prompts-missing": cmd_prompts_missing,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except MvzeroError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_DATA
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
