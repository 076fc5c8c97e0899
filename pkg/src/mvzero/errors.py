"""Exception types shared across the package.

Every error raised by the library derives from MvzeroError so callers can
catch data/format problems in one place (the CLI maps them to exit code 2).
"""

from __future__ import annotations


class MvzeroError(Exception):
    """Base class for all library errors."""


# ---------------------------------------------------------------------------
# Embedding file format (EMB1)
# ---------------------------------------------------------------------------

class EmbeddingFormatError(MvzeroError):
    """A byte stream is not a valid EMB1 file.

    ``offset`` is the byte offset of the first offending field.
    """

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class BadMagic(EmbeddingFormatError):
    def __init__(self, found: bytes):
        super().__init__(f"bad magic {found!r}, expected b'MVEM'", 0)
        self.found = found


class UnsupportedVersion(EmbeddingFormatError):
    def __init__(self, found: int):
        super().__init__(f"unsupported version {found}, expected 1", 4)
        self.found = found


class DtypeMismatch(EmbeddingFormatError):
    def __init__(self, found: int):
        super().__init__(f"unsupported dtype code {found}, expected 1 (f32)", 16)
        self.found = found


class ReservedFieldError(EmbeddingFormatError):
    def __init__(self, found: int):
        super().__init__(f"reserved field is {found}, expected 0", 20)
        self.found = found


class InvalidHeader(EmbeddingFormatError):
    """Header fields describe an impossible matrix (e.g. cols = 0)."""


class TruncatedPayload(EmbeddingFormatError):
    def __init__(self, expected: int, available: int, offset: int):
        super().__init__(
            f"truncated stream: expected {expected} bytes, got {available}", offset
        )
        self.expected = expected
        self.available = available


class TrailingData(EmbeddingFormatError):
    def __init__(self, extra: int, offset: int):
        super().__init__(f"{extra} unexpected trailing bytes", offset)
        self.extra = extra


# ---------------------------------------------------------------------------
# Matrices and manifests
# ---------------------------------------------------------------------------

class ZeroNormRow(MvzeroError):
    def __init__(self, row: int):
        super().__init__(f"row {row} has (near-)zero norm; cannot normalize")
        self.row = row


class DimMismatch(MvzeroError):
    pass


class ManifestSchemaError(MvzeroError):
    pass


class IndexOutOfRange(MvzeroError):
    pass


class UnknownLabel(MvzeroError):
    pass


# ---------------------------------------------------------------------------
# Scoring
# ---------------------------------------------------------------------------

class NonPositiveTemperature(MvzeroError):
    def __init__(self, value: float):
        super().__init__(f"temperature must be > 0, got {value}")
        self.value = value


# ---------------------------------------------------------------------------
# Prompt bank
# ---------------------------------------------------------------------------

class BankSchemaError(MvzeroError):
    pass


class UnknownClass(MvzeroError):
    def __init__(self, name: str):
        super().__init__(f"class {name!r} is not in the bank's class list")
        self.name = name


class MissingPromptEntry(MvzeroError):
    """The bank has no second-layer entry for a candidate set.

    Carries the candidate key so callers can queue offline generation.
    """

    def __init__(self, key: str):
        super().__init__(f"no second-layer prompt entry for key {key!r}")
        self.key = key


class CandidateMismatch(MvzeroError):
    pass


# ---------------------------------------------------------------------------
# Evaluation harness
# ---------------------------------------------------------------------------

class MissingLabel(MvzeroError):
    def __init__(self, shape_id: str):
        super().__init__(f"shape {shape_id!r} has no ground-truth label")
        self.shape_id = shape_id


class EmptyDataset(MvzeroError):
    pass


class InvalidSweepValue(MvzeroError):
    pass


class DimTooSmall(MvzeroError):
    def __init__(self, dim: int, k: int):
        super().__init__(f"dim {dim} < {k} classes; cannot build orthonormal anchors")
        self.dim = dim
        self.k = k
