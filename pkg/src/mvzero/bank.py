"""The two-layer prompt bank.

Layer 1 is one hand-crafted template sentence per class, embedded once as a
K x C matrix. Layer 2 is a keyed store of candidate-set prompt embeddings
generated offline (one descriptive sentence per candidate class). Keys are
the candidate class names sorted by class index and joined with "|", so a
candidate set maps to the same entry regardless of input order.

On disk a bank is a JSON header plus two EMB1 blobs (layer-1 matrix and the
concatenation of all layer-2 entries, addressed by per-entry row ranges).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .embeddings import (
    EmbeddingMatrix,
    normalize_rows,
    read_embeddings_file,
    write_embeddings_file,
)
from .errors import BankSchemaError, MissingPromptEntry, UnknownClass

DEFAULT_LAYER1_TEMPLATE = "A synthetic 3D model view of {} with different angles."


class PromptStyle(str, Enum):
    VISUAL_ONLY = "visual_only"
    FUNCTIONAL_ONLY = "functional_only"
    FUSED = "fused"
    DIFFERENCE = "difference"
    VISUAL_AND_FUNCTIONAL = "visual_and_functional"


@dataclass
class Layer2Entry:
    """Prompt embeddings for one candidate set; row j belongs to
    candidate_classes[j], which is sorted by class index."""

    candidate_classes: list[str]
    embeddings: EmbeddingMatrix
    prompt_texts: list[str]
    prompt_style: PromptStyle = PromptStyle.VISUAL_AND_FUNCTIONAL

    def __post_init__(self):
        self.prompt_style = PromptStyle(self.prompt_style)


@dataclass
class PromptBank:
    classes: list[str]
    layer1: EmbeddingMatrix
    layer1_template: str = DEFAULT_LAYER1_TEMPLATE
    layer2: dict[str, Layer2Entry] = field(default_factory=dict)

    def __post_init__(self):
        self.class_index = {c: i for i, c in enumerate(self.classes)}

    @property
    def dim(self) -> int:
        return self.layer1.cols

    @property
    def num_classes(self) -> int:
        return len(self.classes)


def candidate_key(classes: list[str], bank: PromptBank) -> str:
    """Deterministic, order-insensitive key for a candidate set."""
    if len(classes) < 2:
        raise ValueError("a candidate set needs at least 2 classes")
    indices = []
    for name in classes:
        if name not in bank.class_index:
            raise UnknownClass(name)
        indices.append(bank.class_index[name])
    return "|".join(bank.classes[i] for i in sorted(indices))


def lookup_layer2(candidates: list[str], bank: PromptBank) -> Layer2Entry:
    """Return the layer-2 entry for a candidate set, or raise a typed miss
    that carries the key the offline bridge must generate."""
    key = candidate_key(candidates, bank)
    entry = bank.layer2.get(key)
    if entry is None:
        raise MissingPromptEntry(key)
    return entry


@dataclass
class Finding:
    code: str
    location: str
    detail: str

    def __str__(self) -> str:
        return f"{self.code} at {self.location}: {self.detail}"


def validate_bank(bank: PromptBank, norm_tol: float = 1e-4) -> list[Finding]:
    """Check all bank invariants; returns machine-readable findings.

    Findings are non-fatal by design: the caller decides what to do.
    """
    findings = []

    if len(set(bank.classes)) != len(bank.classes):
        findings.append(Finding("DUPLICATE_CLASS", "classes", "class names repeat"))
    if bank.layer1.rows != len(bank.classes):
        findings.append(
            Finding(
                "ROW_COUNT_MISMATCH",
                "layer1",
                f"{bank.layer1.rows} rows for {len(bank.classes)} classes",
            )
        )

    def check_norms(matrix: EmbeddingMatrix, location: str):
        if matrix.rows == 0:
            return
        norms = np.linalg.norm(matrix.data.astype(np.float64), axis=1)
        for row in np.nonzero(np.abs(norms - 1.0) > norm_tol)[0]:
            findings.append(
                Finding(
                    "NORM_VIOLATION",
                    f"{location}[{row}]",
                    f"row norm {norms[row]:.6f}",
                )
            )

    check_norms(bank.layer1, "layer1")

    for key, entry in bank.layer2.items():
        loc = f"layer2[{key!r}]"
        if len(entry.candidate_classes) < 2:
            findings.append(
                Finding("CANDIDATE_SET_TOO_SMALL", loc, "needs at least 2 classes")
            )
        unknown = [c for c in entry.candidate_classes if c not in bank.class_index]
        for c in unknown:
            findings.append(Finding("UNKNOWN_CLASS", loc, f"candidate {c!r}"))
        if not unknown:
            order = [bank.class_index[c] for c in entry.candidate_classes]
            if order != sorted(order):
                findings.append(
                    Finding("UNSORTED_CANDIDATES", loc, "not in class-index order")
                )
            expected_key = "|".join(bank.classes[i] for i in sorted(order))
            if key != expected_key:
                findings.append(
                    Finding("KEY_MISMATCH", loc, f"expected key {expected_key!r}")
                )
        if entry.embeddings.rows != len(entry.candidate_classes):
            findings.append(
                Finding(
                    "ROW_COUNT_MISMATCH",
                    loc,
                    f"{entry.embeddings.rows} rows for "
                    f"{len(entry.candidate_classes)} candidates",
                )
            )
        if len(entry.prompt_texts) != len(entry.candidate_classes):
            findings.append(
                Finding(
                    "PROMPT_TEXT_COUNT",
                    loc,
                    f"{len(entry.prompt_texts)} texts for "
                    f"{len(entry.candidate_classes)} candidates",
                )
            )
        if entry.embeddings.cols != bank.dim:
            findings.append(
                Finding(
                    "DIM_MISMATCH",
                    loc,
                    f"entry dim {entry.embeddings.cols} != bank dim {bank.dim}",
                )
            )
        check_norms(entry.embeddings, loc)

    return findings


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def save_bank(bank: PromptBank, path: str | Path) -> None:
    """Write the bank header JSON plus its two EMB1 blobs next to it."""
    path = Path(path)
    layer1_file = path.stem + "_layer1.emb1"
    layer2_file = path.stem + "_layer2.emb1"

    entries = []
    blocks = []
    row_cursor = 0
    for key in sorted(bank.layer2):
        entry = bank.layer2[key]
        n = entry.embeddings.rows
        entries.append(
            {
                "key": key,
                "classes": list(entry.candidate_classes),
                "row_start": row_cursor,
                "row_count": n,
                "prompt_texts": list(entry.prompt_texts),
                "prompt_style": entry.prompt_style.value,
            }
        )
        blocks.append(entry.embeddings.data)
        row_cursor += n

    if blocks:
        layer2_data = np.vstack(blocks)
    else:
        layer2_data = np.zeros((0, bank.dim), dtype=np.float32)

    write_embeddings_file(bank.layer1, path.parent / layer1_file)
    write_embeddings_file(EmbeddingMatrix(layer2_data), path.parent / layer2_file)

    doc = {
        "classes": list(bank.classes),
        "dim": bank.dim,
        "layer1_template": bank.layer1_template,
        "layer1_file": layer1_file,
        "layer2_file": layer2_file,
        "layer2_entries": entries,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, ensure_ascii=False, indent=2)
        fh.write("\n")


def load_bank(path: str | Path, normalize: bool = True) -> PromptBank:
    """Load a bank; by default rows are normalized at load (files keep the
    bridge's raw output)."""
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise BankSchemaError(f"bank header is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise BankSchemaError("bank header must be a JSON object")
    for key in ("classes", "dim", "layer1_template", "layer1_file", "layer2_file",
                "layer2_entries"):
        if key not in doc:
            raise BankSchemaError(f"bank header missing required field {key!r}")
    classes = doc["classes"]
    if not isinstance(classes, list) or not all(isinstance(c, str) for c in classes):
        raise BankSchemaError("classes must be a list of strings")
    if len(set(classes)) != len(classes):
        raise BankSchemaError("classes must be unique")
    if not isinstance(doc["layer2_entries"], list) or not all(
        isinstance(e, dict) for e in doc["layer2_entries"]
    ):
        raise BankSchemaError("layer2_entries must be a list of objects")
    if not isinstance(doc["layer1_file"], str) or not isinstance(doc["layer2_file"], str):
        raise BankSchemaError("layer file references must be string paths")

    layer1 = read_embeddings_file(path.parent / doc["layer1_file"])
    layer2_matrix = read_embeddings_file(path.parent / doc["layer2_file"])
    if normalize:
        layer1 = normalize_rows(layer1)
        if layer2_matrix.rows > 0:
            layer2_matrix = normalize_rows(layer2_matrix)
    if layer1.cols != doc["dim"]:
        raise BankSchemaError(
            f"layer1 file dim {layer1.cols} != declared dim {doc['dim']}"
        )

    layer2 = {}
    for raw in doc["layer2_entries"]:
        for field_name in ("key", "classes", "row_start", "row_count", "prompt_texts",
                           "prompt_style"):
            if field_name not in raw:
                raise BankSchemaError(f"layer2 entry missing field {field_name!r}")
        start, count = raw["row_start"], raw["row_count"]
        if (
            not isinstance(start, int)
            or not isinstance(count, int)
            or start < 0
            or count < 0
            or start + count > layer2_matrix.rows
        ):
            raise BankSchemaError(
                f"entry {raw['key']!r} rows [{start}, {start}+{count}) outside "
                f"layer2 matrix of {layer2_matrix.rows} rows"
            )
        try:
            style = PromptStyle(raw["prompt_style"])
        except ValueError as exc:
            raise BankSchemaError(
                f"entry {raw['key']!r} has unknown prompt_style {raw['prompt_style']!r}"
            ) from exc
        layer2[raw["key"]] = Layer2Entry(
            candidate_classes=list(raw["classes"]),
            embeddings=EmbeddingMatrix(
                layer2_matrix.data[start : start + count].copy(),
                normalized=layer2_matrix.normalized,
            ),
            prompt_texts=list(raw["prompt_texts"]),
            prompt_style=style,
        )

    return PromptBank(
        classes=list(classes),
        layer1=layer1,
        layer1_template=doc["layer1_template"],
        layer2=layer2,
    )
