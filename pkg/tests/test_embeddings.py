"""EMB1 format, normalization, and manifest loading."""

import io
import json
import struct

import numpy as np
import pytest

from mvzero.embeddings import (
    DatasetManifest,
    EmbeddingMatrix,
    ShapeRecord,
    load_dataset,
    manifest_to_dict,
    normalize_rows,
    read_embeddings,
    save_manifest,
    write_embeddings,
    write_embeddings_file,
)
from mvzero.errors import (
    BadMagic,
    DimMismatch,
    DtypeMismatch,
    EmbeddingFormatError,
    IndexOutOfRange,
    InvalidHeader,
    ManifestSchemaError,
    MvzeroError,
    ReservedFieldError,
    TrailingData,
    TruncatedPayload,
    UnknownLabel,
    UnsupportedVersion,
    ZeroNormRow,
)


def roundtrip(matrix: EmbeddingMatrix) -> EmbeddingMatrix:
    buf = io.BytesIO()
    write_embeddings(matrix, buf)
    buf.seek(0)
    return read_embeddings(buf)


class TestFormat:
    def test_1x2_layout(self):
        buf = io.BytesIO()
        write_embeddings(EmbeddingMatrix(np.array([[1.0, 0.0]], dtype=np.float32)), buf)
        blob = buf.getvalue()
        # 24-byte header (magic, version, rows, cols, dtype, reserved) + 8 payload
        assert len(blob) == 32
        assert blob[:4] == b"MVEM"
        assert struct.unpack_from("<IIIII", blob, 4) == (1, 1, 2, 1, 0)
        assert np.frombuffer(blob[24:], dtype="<f4").tolist() == [1.0, 0.0]

    def test_empty_matrix(self):
        m = roundtrip(EmbeddingMatrix(np.zeros((0, 4), dtype=np.float32)))
        assert m.rows == 0 and m.cols == 4

    def test_roundtrip_bitwise(self):
        rng = np.random.default_rng(0)
        m = EmbeddingMatrix(rng.standard_normal((100, 512)).astype(np.float32))
        back = roundtrip(m)
        assert back.data.tobytes() == m.data.tobytes()

    def test_bad_magic(self):
        blob = b"XXXX" + bytes(24)
        with pytest.raises(BadMagic) as exc:
            read_embeddings(io.BytesIO(blob))
        assert exc.value.offset == 0

    def test_bad_version(self):
        blob = struct.pack("<4sIIIII", b"MVEM", 2, 0, 4, 1, 0)
        with pytest.raises(UnsupportedVersion) as exc:
            read_embeddings(io.BytesIO(blob))
        assert exc.value.offset == 4

    def test_bad_dtype(self):
        blob = struct.pack("<4sIIIII", b"MVEM", 1, 0, 4, 2, 0)
        with pytest.raises(DtypeMismatch) as exc:
            read_embeddings(io.BytesIO(blob))
        assert exc.value.offset == 16

    def test_reserved_nonzero(self):
        blob = struct.pack("<4sIIIII", b"MVEM", 1, 0, 4, 1, 9)
        with pytest.raises(ReservedFieldError) as exc:
            read_embeddings(io.BytesIO(blob))
        assert exc.value.offset == 20

    def test_zero_cols(self):
        blob = struct.pack("<4sIIIII", b"MVEM", 1, 3, 0, 1, 0)
        with pytest.raises(InvalidHeader):
            read_embeddings(io.BytesIO(blob))

    def test_truncated_payload(self):
        # header claims 10x4 floats (160 bytes) but payload has 32
        blob = struct.pack("<4sIIIII", b"MVEM", 1, 10, 4, 1, 0) + bytes(32)
        with pytest.raises(TruncatedPayload) as exc:
            read_embeddings(io.BytesIO(blob))
        assert exc.value.offset == 24 + 32

    def test_truncated_header(self):
        with pytest.raises(TruncatedPayload):
            read_embeddings(io.BytesIO(b"MVEM\x01"))

    def test_trailing_data(self):
        buf = io.BytesIO()
        write_embeddings(EmbeddingMatrix(np.ones((1, 2), dtype=np.float32)), buf)
        with pytest.raises(TrailingData):
            read_embeddings(io.BytesIO(buf.getvalue() + b"\x00"))

    def test_header_corruption_fuzz(self):
        """Any single-field header/payload corruption is rejected typed."""
        buf = io.BytesIO()
        write_embeddings(
            EmbeddingMatrix(np.arange(12, dtype=np.float32).reshape(3, 4)), buf
        )
        good = bytearray(buf.getvalue())
        mutations = []
        for offset, value in [(0, b"ZVEM"), (4, struct.pack("<I", 7)),
                              (8, struct.pack("<I", 99)), (12, struct.pack("<I", 0)),
                              (16, struct.pack("<I", 3)), (20, struct.pack("<I", 1))]:
            blob = bytearray(good)
            blob[offset : offset + len(value)] = value
            mutations.append(bytes(blob))
        mutations.append(bytes(good[:-3]))       # truncated payload
        mutations.append(bytes(good) + b"\x00")  # trailing byte
        for blob in mutations:
            with pytest.raises(EmbeddingFormatError):
                read_embeddings(io.BytesIO(blob))


class TestNormalize:
    def test_three_four_five(self):
        out = normalize_rows(EmbeddingMatrix(np.array([[3.0, 4.0]], dtype=np.float32)))
        np.testing.assert_allclose(out.data, [[0.6, 0.8]], atol=1e-7)
        assert out.normalized

    def test_already_unit(self):
        m = EmbeddingMatrix(np.array([[0.0, 1.0]], dtype=np.float32))
        out = normalize_rows(m)
        assert out.data.tobytes() == m.data.tobytes()

    def test_zero_norm(self):
        with pytest.raises(ZeroNormRow) as exc:
            normalize_rows(EmbeddingMatrix(np.zeros((1, 2), dtype=np.float32)))
        assert exc.value.row == 0

    def test_idempotent_exactly(self):
        rng = np.random.default_rng(1)
        m = EmbeddingMatrix(
            (rng.standard_normal((200, 33)) * rng.uniform(0.1, 50, (200, 1))).astype(
                np.float32
            )
        )
        once = normalize_rows(m)
        twice = normalize_rows(once)
        assert once.data.tobytes() == twice.data.tobytes()


def write_fixture(tmp_path, n_rows=6, dim=4, shapes=None, classes=None, dim_field=None):
    rng = np.random.default_rng(5)
    matrix = EmbeddingMatrix(rng.standard_normal((n_rows, dim)).astype(np.float32))
    write_embeddings_file(matrix, tmp_path / "views.emb1")
    if shapes is None:
        shapes = [
            ShapeRecord("s0", [0, 1, 2], label="cat", view_config="circular"),
            ShapeRecord("s1", [3, 4, 5], label="dog", view_config="circular"),
        ]
    manifest = DatasetManifest(
        dataset_name="tiny",
        classes=classes or ["cat", "dog"],
        shapes=shapes,
        embedding_file="views.emb1",
        dim=dim_field or dim,
    )
    save_manifest(manifest, tmp_path / "manifest.json")
    return tmp_path / "manifest.json"


class TestLoadDataset:
    def test_valid(self, tmp_path):
        manifest, matrix = load_dataset(write_fixture(tmp_path))
        assert manifest.classes == ["cat", "dog"]
        assert matrix.normalized
        norms = np.linalg.norm(matrix.data.astype(np.float64), axis=1)
        np.testing.assert_allclose(norms, 1.0, atol=1e-6)

    def test_index_out_of_range(self, tmp_path):
        path = write_fixture(
            tmp_path,
            n_rows=5,
            shapes=[ShapeRecord("s0", [0, 7], label="cat")],
        )
        with pytest.raises(IndexOutOfRange):
            load_dataset(path)

    def test_dim_mismatch(self, tmp_path):
        path = write_fixture(tmp_path, dim=4, dim_field=512)
        with pytest.raises(DimMismatch):
            load_dataset(path)

    def test_unknown_label(self, tmp_path):
        doc = json.loads(write_fixture(tmp_path).read_text())
        doc["shapes"][0]["label"] = "unicorn"
        path = tmp_path / "manifest.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(UnknownLabel):
            load_dataset(path)

    def test_manifest_corruption_enumeration(self, tmp_path):
        """Single-field corruptions of a valid manifest are all rejected."""
        path = write_fixture(tmp_path)
        good = json.loads(path.read_text())

        def corrupt(**changes):
            doc = json.loads(json.dumps(good))
            for key, value in changes.items():
                if value is ...:
                    del doc[key]
                else:
                    doc[key] = value
            return doc

        bad_docs = [
            corrupt(classes=...),
            corrupt(dim=...),
            corrupt(shapes=...),
            corrupt(embedding_file=...),
            corrupt(dataset_name=...),
            corrupt(classes=["cat", "cat"]),
            corrupt(classes=[]),
            corrupt(classes="cat"),
            corrupt(dim="four"),
            corrupt(dim=0),
            corrupt(dim=3),       # disagrees with the file
            corrupt(shapes="nope"),
        ]
        shape_mutations = [
            {"view_rows": []},
            {"view_rows": [0, 0, 1]},
            {"view_rows": [0, 99]},
            {"view_rows": "abc"},
            {"view_config": "hexagonal"},
            {"label": "unicorn"},
            {"label": 3},
        ]
        for mutation in shape_mutations:
            doc = json.loads(json.dumps(good))
            doc["shapes"][0].update(mutation)
            bad_docs.append(doc)

        for doc in bad_docs:
            path.write_text(json.dumps(doc))
            with pytest.raises(MvzeroError):
                load_dataset(path)

    def test_roundtrip_to_dict(self, tmp_path):
        path = write_fixture(tmp_path)
        manifest, _ = load_dataset(path)
        assert manifest_to_dict(manifest) == json.loads(path.read_text())
