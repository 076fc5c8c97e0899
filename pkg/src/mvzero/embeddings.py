"""Embedding storage: the EMB1 binary format and JSON dataset manifests.

EMB1 layout (little-endian):

    bytes  0-3   magic  b"MVEM"
    bytes  4-7   version  u32 = 1
    bytes  8-11  rows     u32
    bytes 12-15  cols     u32
    bytes 16-19  dtype    u32 (1 = f32)
    bytes 20-23  reserved u32 = 0
    bytes 24-    payload  rows * cols * 4 bytes, row-major f32

Files hold raw encoder output; row normalization happens at load so the
files stay reusable by other tools. All norm/dot reductions run in f64.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Optional

import numpy as np

from .errors import (
    BadMagic,
    DimMismatch,
    DtypeMismatch,
    IndexOutOfRange,
    InvalidHeader,
    ManifestSchemaError,
    ReservedFieldError,
    TrailingData,
    TruncatedPayload,
    UnknownLabel,
    UnsupportedVersion,
    ZeroNormRow,
)

MAGIC = b"MVEM"
VERSION = 1
DTYPE_F32 = 1
HEADER_SIZE = 24

# Rows whose norm is already this close to 1.0 are left untouched by
# normalize_rows; this makes normalization exactly idempotent (a second
# pass always sees norms within f32 rounding of 1.0 and skips them).
_NORM_SKIP_TOL = 1e-6

_ZERO_NORM_TOL = 1e-8

VIEW_CONFIGS = ("circular", "spherical", "random", "other")


@dataclass
class EmbeddingMatrix:
    """Dense row-major matrix of f32 feature vectors (views or prompts)."""

    data: np.ndarray  # shape (rows, cols), dtype float32
    normalized: bool = False

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float32)
        if arr.ndim != 2:
            raise ValueError(f"expected a 2-D array, got ndim={arr.ndim}")
        if arr.shape[1] < 1:
            raise ValueError("cols must be >= 1")
        self.data = np.ascontiguousarray(arr)

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    def row(self, i: int) -> np.ndarray:
        return self.data[i]

    def check_normalized(self, tol: float = 1e-4) -> None:
        """Raise if the normalized flag is set but some row norm is off."""
        if not self.normalized:
            return
        norms = np.linalg.norm(self.data.astype(np.float64), axis=1)
        bad = np.nonzero(np.abs(norms - 1.0) > tol)[0]
        if bad.size:
            raise ValueError(f"row {bad[0]} norm {norms[bad[0]]} violates unit-norm flag")


def write_embeddings(matrix: EmbeddingMatrix, sink: BinaryIO) -> None:
    """Write a matrix in EMB1 format; round-trips bitwise with read_embeddings."""
    header = struct.pack(
        "<4sIIIII", MAGIC, VERSION, matrix.rows, matrix.cols, DTYPE_F32, 0
    )
    sink.write(header)
    sink.write(matrix.data.astype("<f4", copy=False).tobytes())


def write_embeddings_file(matrix: EmbeddingMatrix, path: str | Path) -> None:
    with open(path, "wb") as fh:
        write_embeddings(matrix, fh)


def read_embeddings(source: BinaryIO) -> EmbeddingMatrix:
    """Read an EMB1 stream. Does not normalize.

    Raises a typed EmbeddingFormatError naming the first offending byte
    offset when the stream is malformed.
    """
    blob = source.read()
    if len(blob) < HEADER_SIZE:
        raise TruncatedPayload(expected=HEADER_SIZE, available=len(blob), offset=len(blob))
    magic, version, rows, cols, dtype, reserved = struct.unpack_from("<4sIIIII", blob, 0)
    if magic != MAGIC:
        raise BadMagic(magic)
    if version != VERSION:
        raise UnsupportedVersion(version)
    if dtype != DTYPE_F32:
        raise DtypeMismatch(dtype)
    if reserved != 0:
        raise ReservedFieldError(reserved)
    if cols == 0:
        raise InvalidHeader("cols must be >= 1", 12)
    expected = rows * cols * 4
    available = len(blob) - HEADER_SIZE
    if available < expected:
        raise TruncatedPayload(
            expected=expected, available=available, offset=HEADER_SIZE + available
        )
    if available > expected:
        raise TrailingData(extra=available - expected, offset=HEADER_SIZE + expected)
    data = np.frombuffer(blob, dtype="<f4", count=rows * cols, offset=HEADER_SIZE)
    return EmbeddingMatrix(data.reshape(rows, cols).copy())


def read_embeddings_file(path: str | Path) -> EmbeddingMatrix:
    with open(path, "rb") as fh:
        return read_embeddings(fh)


def normalize_rows(matrix: EmbeddingMatrix) -> EmbeddingMatrix:
    """Divide each row by its Euclidean norm (f64 accumulation) and flag it.

    Rows already within _NORM_SKIP_TOL of unit norm are left bit-identical,
    which makes the operation exactly idempotent. A row with norm below
    1e-8 raises ZeroNormRow: that indicates an upstream encoder fault.
    """
    data64 = matrix.data.astype(np.float64)
    norms = np.linalg.norm(data64, axis=1)
    small = np.nonzero(norms < _ZERO_NORM_TOL)[0]
    if small.size:
        raise ZeroNormRow(int(small[0]))
    out = matrix.data.copy()
    needs = np.abs(norms - 1.0) > _NORM_SKIP_TOL
    if needs.any():
        out[needs] = (data64[needs] / norms[needs, None]).astype(np.float32)
    return EmbeddingMatrix(out, normalized=True)


@dataclass
class ShapeRecord:
    """One 3D shape: ordered view rows into a views matrix, optional label.

    view_rows order is the rendering order; selection tie-breaking
    depends on it.
    """

    shape_id: str
    view_rows: list[int]
    label: Optional[str] = None
    view_config: str = "other"


@dataclass
class DatasetManifest:
    """Class list plus shape records; class position defines label indexing."""

    dataset_name: str
    classes: list[str]
    shapes: list[ShapeRecord]
    embedding_file: str
    dim: int
    class_index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self.class_index = {c: i for i, c in enumerate(self.classes)}

    def label_index(self, label: str) -> int:
        return self.class_index[label]


def manifest_to_dict(manifest: DatasetManifest) -> dict:
    shapes = []
    for s in manifest.shapes:
        entry = {
            "shape_id": s.shape_id,
            "view_rows": list(s.view_rows),
            "view_config": s.view_config,
        }
        if s.label is not None:
            entry["label"] = s.label
        shapes.append(entry)
    return {
        "dataset_name": manifest.dataset_name,
        "classes": list(manifest.classes),
        "dim": manifest.dim,
        "embedding_file": manifest.embedding_file,
        "shapes": shapes,
    }


def save_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest_to_dict(manifest), fh, ensure_ascii=False, indent=2)
        fh.write("\n")


def parse_manifest(doc: dict) -> DatasetManifest:
    """Build a DatasetManifest from parsed JSON, checking the schema."""
    if not isinstance(doc, dict):
        raise ManifestSchemaError("manifest root must be a JSON object")
    for key in ("dataset_name", "classes", "dim", "embedding_file", "shapes"):
        if key not in doc:
            raise ManifestSchemaError(f"manifest missing required field {key!r}")
    classes = doc["classes"]
    if not isinstance(classes, list) or not all(isinstance(c, str) for c in classes):
        raise ManifestSchemaError("classes must be a list of strings")
    if len(set(classes)) != len(classes):
        raise ManifestSchemaError("classes must be unique")
    if not classes:
        raise ManifestSchemaError("classes must be non-empty")
    if not isinstance(doc["dim"], int) or doc["dim"] < 1:
        raise ManifestSchemaError("dim must be a positive integer")
    if not isinstance(doc["embedding_file"], str):
        raise ManifestSchemaError("embedding_file must be a string path")
    if not isinstance(doc["shapes"], list):
        raise ManifestSchemaError("shapes must be a list")

    shapes = []
    for i, raw in enumerate(doc["shapes"]):
        if not isinstance(raw, dict) or "shape_id" not in raw or "view_rows" not in raw:
            raise ManifestSchemaError(f"shape #{i} must have shape_id and view_rows")
        rows = raw["view_rows"]
        if (
            not isinstance(rows, list)
            or not rows
            or not all(isinstance(r, int) and not isinstance(r, bool) for r in rows)
        ):
            raise ManifestSchemaError(f"shape #{i}: view_rows must be a non-empty int list")
        if len(set(rows)) != len(rows):
            raise ManifestSchemaError(f"shape #{i}: duplicate view_rows")
        config = raw.get("view_config", "other")
        if config not in VIEW_CONFIGS:
            raise ManifestSchemaError(
                f"shape #{i}: view_config {config!r} not one of {VIEW_CONFIGS}"
            )
        label = raw.get("label")
        if label is not None and not isinstance(label, str):
            raise ManifestSchemaError(f"shape #{i}: label must be a string")
        shapes.append(
            ShapeRecord(
                shape_id=str(raw["shape_id"]),
                view_rows=list(rows),
                label=label,
                view_config=config,
            )
        )
    return DatasetManifest(
        dataset_name=str(doc["dataset_name"]),
        classes=list(classes),
        shapes=shapes,
        embedding_file=doc["embedding_file"],
        dim=doc["dim"],
    )


def load_dataset(manifest_path: str | Path) -> tuple[DatasetManifest, EmbeddingMatrix]:
    """Load a manifest and its embedding file; cross-validate; normalize rows.

    Raises ManifestSchemaError / IndexOutOfRange / UnknownLabel / DimMismatch
    on the first violated invariant, or an EmbeddingFormatError from the
    embedding file itself.
    """
    manifest_path = Path(manifest_path)
    try:
        with open(manifest_path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ManifestSchemaError(f"manifest is not valid JSON: {exc}") from exc
    manifest = parse_manifest(doc)

    emb_path = manifest_path.parent / manifest.embedding_file
    matrix = read_embeddings_file(emb_path)

    if matrix.cols != manifest.dim:
        raise DimMismatch(
            f"manifest dim={manifest.dim} but embedding file has cols={matrix.cols}"
        )
    for shape in manifest.shapes:
        for r in shape.view_rows:
            if r < 0 or r >= matrix.rows:
                raise IndexOutOfRange(
                    f"shape {shape.shape_id!r} references row {r} of a "
                    f"{matrix.rows}-row matrix"
                )
        if shape.label is not None and shape.label not in manifest.class_index:
            raise UnknownLabel(
                f"shape {shape.shape_id!r} has label {shape.label!r} not in classes"
            )
    return manifest, normalize_rows(matrix)
