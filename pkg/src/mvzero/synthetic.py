"""Seed-deterministic synthetic fixtures with planted ground truth.

The generator builds a desk-scale dataset whose difficulty structure is
constructed, so every pipeline claim has a checkable analogue without any
pretrained encoder:

* Every class c gets an orthonormal anchor direction a_c (layer-1 prompts
  point at the anchors) and an orthonormal signature direction s_c that
  layer-1 prompts cannot see. Views of class c carry a little of s_c;
  second-layer prompt rows for c add s_c back with a planted boost, which
  is what makes refinement able to out-resolve layer 1 inside a candidate
  set.
* A shared common direction is mixed into every view and prompt so cosine
  scores sit in a narrow band, the way contrastive encoders behave; the
  confidence gate then operates in a meaningful probability range.
* Shapes split into three planted sub-populations: "easy" ones whose clean
  views point straight at the anchor, and "hard"/"harder" ones whose clean
  views lean toward one or two rival classes, leaving the layer-1 decision
  wrong but rescuable. Ambiguous views are decoys (confident pairs of
  wrong classes) and mush (multi-way near-ties), both with higher entropy
  than any clean view, so entropy-ranked selection prefers clean views
  while the diversity-constrained ablation is forced to admit decoys.

All draws come from one seeded generator in a fixed order, so equal specs
produce bitwise-identical outputs.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bank import Layer2Entry, PromptBank, PromptStyle, save_bank
from .embeddings import (
    DatasetManifest,
    EmbeddingMatrix,
    ShapeRecord,
    save_manifest,
    write_embeddings_file,
)
from .errors import DimTooSmall

# weight of the shared common direction in every view and prompt
COMMON_WEIGHT = 1.0
# weight of the class anchor inside prompt rows
PROMPT_ANCHOR_WEIGHT = 0.25
# clean-view anchor weight (easy shapes)
CLEAN_WEIGHT = 0.52
# hard shapes: clean views lean toward one rival
HARD_TRUE, HARD_RIVAL = 0.26, 0.34
# harder shapes: clean views lean toward two rivals; the bigger lead keeps
# them rescuable only while the layer-2 boost is strong (small sets)
HARDER_TRUE, HARDER_RIVAL1, HARDER_RIVAL2 = 0.26, 0.43, 0.30
# trap shapes: layer 1 gets them right with low confidence, but their views
# leak the rival's signature, so refinement flips them wrong (the
# right-to-wrong failure mode the broken counter tracks)
TRAP_TRUE, TRAP_RIVAL = 0.34, 0.26
TRAP_SIG_LEAK = 2.0
# decoy views: a confident near-tie among three wrong classes
DECOY_WEIGHTS = (0.90, 0.86, 0.82)
# mush views: a diffuse near-tie among three wrong classes plus a whisper
# of the true class
MUSH_WEIGHTS = (0.32, 0.28, 0.26)
MUSH_TRUE = 0.14
# uniform_mixture mode: ambiguous views point at the mean anchor
UNIFORM_WEIGHT = 0.40
# signature strength inside views
VIEW_SIG_WEIGHT = 0.25
# layer-2 signature boost, diluted as candidate sets grow
LAYER2_SIG_BASE = 0.45

# sub-population split (easy / hard / harder / trap), by position within
# a class
EASY_FRACTION = 0.4
HARD_FRACTION = 0.3
HARDER_FRACTION = 0.2


def layer2_sig_weight(set_size: int) -> float:
    return LAYER2_SIG_BASE / (set_size - 1)


@dataclass
class SyntheticSpec:
    num_classes: int = 10
    dim: int = 64
    shapes_per_class: int = 50
    views_per_shape: int = 20
    clean_views: int = 4
    noise_sigma: float = 0.01
    ambiguous_view_mode: str = "wrong_class_leak"  # or "uniform_mixture"
    seed: int = 7
    # sizes of candidate sets to pre-generate layer-2 entries for
    candidate_sizes: tuple[int, ...] = (2, 3, 4)

    def __post_init__(self):
        if self.clean_views > self.views_per_shape:
            raise ValueError("clean_views must be <= views_per_shape")
        if self.ambiguous_view_mode not in ("wrong_class_leak", "uniform_mixture"):
            raise ValueError(f"unknown ambiguous_view_mode {self.ambiguous_view_mode!r}")
        if any(s < 2 or s > self.num_classes for s in self.candidate_sizes):
            raise ValueError("candidate sizes must be in [2, num_classes]")


@dataclass
class SyntheticDataset:
    manifest: DatasetManifest
    views: EmbeddingMatrix
    bank: PromptBank
    # per shape_id, the planted sub-population ("easy" | "hard" | "harder")
    populations: dict[str, str] = field(default_factory=dict)


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def generate_synthetic(spec: SyntheticSpec) -> SyntheticDataset:
    k = spec.num_classes
    if spec.dim < k:
        raise DimTooSmall(spec.dim, k)
    rng = np.random.default_rng(spec.seed)

    # orthonormal frame: common direction, K anchors, K signatures
    n_cols = min(spec.dim, 2 * k + 1)
    basis, _ = np.linalg.qr(rng.standard_normal((spec.dim, n_cols)))
    if spec.dim >= k + 1:
        common = basis[:, 0]
        anchors = basis[:, 1 : k + 1].T
        have = n_cols - (k + 1)
    else:  # dim == k: no room for a common direction
        common = np.zeros(spec.dim)
        anchors = basis[:, :k].T
        have = 0
    if have >= k:
        signatures = basis[:, k + 1 : 2 * k + 1].T
    else:
        signatures = np.stack([_unit(rng.standard_normal(spec.dim)) for _ in range(k)])

    classes = [f"class_{i:02d}" for i in range(k)]

    # ---- prompt bank -------------------------------------------------
    layer1 = np.stack(
        [_unit(COMMON_WEIGHT * common + PROMPT_ANCHOR_WEIGHT * anchors[c]) for c in range(k)]
    ).astype(np.float32)
    template = "A synthetic 3D model view of {} with different angles."

    layer2: dict[str, Layer2Entry] = {}
    for size in sorted(set(spec.candidate_sizes)):
        beta = layer2_sig_weight(size)
        for subset in itertools.combinations(range(k), size):
            rows = np.stack(
                [
                    _unit(
                        COMMON_WEIGHT * common
                        + PROMPT_ANCHOR_WEIGHT * anchors[c]
                        + beta * signatures[c]
                    )
                    for c in subset
                ]
            ).astype(np.float32)
            names = [classes[c] for c in subset]
            texts = [
                f"Distinct silhouette and usage cues of {classes[c]} compared with "
                + ", ".join(classes[o] for o in subset if o != c)
                + "."
                for c in subset
            ]
            layer2["|".join(names)] = Layer2Entry(
                candidate_classes=names,
                embeddings=EmbeddingMatrix(rows, normalized=True),
                prompt_texts=texts,
                prompt_style=PromptStyle.VISUAL_AND_FUNCTIONAL,
            )

    bank = PromptBank(
        classes=classes,
        layer1=EmbeddingMatrix(layer1, normalized=True),
        layer1_template=template,
        layer2=layer2,
    )

    # ---- views and shapes --------------------------------------------
    n_ambiguous = spec.views_per_shape - spec.clean_views
    all_views: list[np.ndarray] = []
    shapes: list[ShapeRecord] = []
    populations: dict[str, str] = {}

    def make_view(content: np.ndarray, true_class: int, sig_leak: np.ndarray | None = None) -> np.ndarray:
        v = (
            COMMON_WEIGHT * common
            + content
            + VIEW_SIG_WEIGHT * signatures[true_class]
            + spec.noise_sigma * rng.standard_normal(spec.dim)
        )
        if sig_leak is not None:
            v = v + sig_leak
        return _unit(v)

    for c in range(k):
        others = [o for o in range(k) if o != c]
        for i in range(spec.shapes_per_class):
            frac = i / spec.shapes_per_class
            if n_ambiguous == 0 or frac < EASY_FRACTION:
                population = "easy"
            elif frac < EASY_FRACTION + HARD_FRACTION:
                population = "hard"
            elif frac < EASY_FRACTION + HARD_FRACTION + HARDER_FRACTION:
                population = "harder"
            else:
                population = "trap"

            perm = rng.permutation(others) if others else np.array([], dtype=int)

            def other(j: int) -> int:
                return int(perm[j % len(perm)]) if len(perm) else c

            rival1, rival2 = other(0), other(1)
            decoy_classes = [other(2), other(3), other(4)]
            mush_classes = [other(5), other(6), other(7)]

            views = []
            for _ in range(spec.clean_views):
                leak = None
                if population == "easy":
                    content = CLEAN_WEIGHT * anchors[c]
                elif population == "hard":
                    content = HARD_TRUE * anchors[c] + HARD_RIVAL * anchors[rival1]
                elif population == "harder":
                    content = (
                        HARDER_TRUE * anchors[c]
                        + HARDER_RIVAL1 * anchors[rival1]
                        + HARDER_RIVAL2 * anchors[rival2]
                    )
                else:  # trap
                    content = TRAP_TRUE * anchors[c] + TRAP_RIVAL * anchors[rival1]
                    leak = TRAP_SIG_LEAK * VIEW_SIG_WEIGHT * signatures[rival1]
                views.append(make_view(content, c, leak))

            for j in range(n_ambiguous):
                if spec.ambiguous_view_mode == "uniform_mixture":
                    content = UNIFORM_WEIGHT * anchors.mean(axis=0)
                elif j < 4:  # decoys: rotate which wrong class leads
                    content = sum(
                        w * anchors[decoy_classes[(j + t) % 3]]
                        for t, w in enumerate(DECOY_WEIGHTS)
                    )
                else:  # mush
                    content = (
                        sum(w * anchors[m] for w, m in zip(MUSH_WEIGHTS, mush_classes))
                        + MUSH_TRUE * anchors[c]
                    )
                views.append(make_view(content, c))

            start = len(all_views)
            all_views.extend(views)
            shape_id = f"{classes[c]}_{i:04d}"
            shapes.append(
                ShapeRecord(
                    shape_id=shape_id,
                    view_rows=list(range(start, start + len(views))),
                    label=classes[c],
                    view_config="other",
                )
            )
            populations[shape_id] = population

    views_matrix = EmbeddingMatrix(
        np.stack(all_views).astype(np.float32), normalized=True
    )
    manifest = DatasetManifest(
        dataset_name=f"synthetic_k{k}_seed{spec.seed}",
        classes=classes,
        shapes=shapes,
        embedding_file="views.emb1",
        dim=spec.dim,
    )
    return SyntheticDataset(
        manifest=manifest, views=views_matrix, bank=bank, populations=populations
    )


def write_synthetic_dataset(spec: SyntheticSpec, out_dir: str | Path) -> dict[str, Path]:
    """Generate and persist a fixture; returns the paths written."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    data = generate_synthetic(spec)
    paths = {
        "views": out_dir / "views.emb1",
        "manifest": out_dir / "manifest.json",
        "bank": out_dir / "bank.json",
    }
    write_embeddings_file(data.views, paths["views"])
    save_manifest(data.manifest, paths["manifest"])
    save_bank(data.bank, paths["bank"])
    return paths
