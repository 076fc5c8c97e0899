"""Hierarchical decision procedure: aggregation, gate, candidates, layer 2."""

import dataclasses
import math

import numpy as np
import pytest

from mvzero.bank import Layer2Entry
from mvzero.classifier import (
    Aggregation,
    ClassifierConfig,
    classify_shape,
    confidence_gate,
    first_layer,
    second_layer,
    top_k_candidates,
)
from mvzero.embeddings import EmbeddingMatrix, ShapeRecord
from mvzero.errors import CandidateMismatch
from mvzero.selection import SelectionConfig, SelectionMode

from conftest import add_entry, make_bank, unit_rows


def config_for(m_total, m_select=None, **kw):
    m_select = m_select or m_total
    return ClassifierConfig(
        selection=SelectionConfig(m_total=m_total, m_select=m_select), **kw
    )


class TestFirstLayer:
    def test_two_view_analytic_sum(self):
        # per-view logits [1, 0] and [0, 2] at tau=1
        views = EmbeddingMatrix(np.array([[1, 0], [0, 2]], dtype=np.float32))
        bank = make_bank(np.eye(2, dtype=np.float32))
        shape = ShapeRecord("s", [0, 1])
        record = first_layer(shape, views, bank, config_for(2, temperature=1.0))
        np.testing.assert_allclose(record.layer1_logits.values, [1.0, 2.0], atol=1e-12)
        assert record.layer1_top1 == 1

    def test_single_view_identity(self):
        rng = np.random.default_rng(40)
        views = EmbeddingMatrix(unit_rows(rng, 1, 8), normalized=True)
        bank = make_bank(unit_rows(rng, 5, 8))
        shape = ShapeRecord("s", [0])
        record = first_layer(shape, views, bank, config_for(1))
        from mvzero.scoring import compute_logits

        direct = compute_logits(views.row(0), bank.layer1, 100.0)
        np.testing.assert_array_equal(record.layer1_logits.values, direct.values)

    def test_sum_matches_brute_force(self):
        from mvzero.scoring import compute_logits

        rng = np.random.default_rng(41)
        views = EmbeddingMatrix(unit_rows(rng, 20, 32), normalized=True)
        bank = make_bank(unit_rows(rng, 9, 32))
        shape = ShapeRecord("s", list(range(20)))
        config = config_for(20, 6)
        record = first_layer(shape, views, bank, config)
        expected = np.zeros(9)
        for i in record.selected_views:
            expected += compute_logits(views.row(i), bank.layer1, 100.0).values
        np.testing.assert_allclose(record.layer1_logits.values, expected, atol=1e-6)

    def test_probs_use_per_view_mean(self):
        from mvzero.scoring import softmax

        rng = np.random.default_rng(42)
        views = EmbeddingMatrix(unit_rows(rng, 4, 16), normalized=True)
        bank = make_bank(unit_rows(rng, 6, 16))
        shape = ShapeRecord("s", [0, 1, 2, 3])
        record = first_layer(shape, views, bank, config_for(4))
        expected = softmax(record.layer1_logits.values / 4).values
        np.testing.assert_allclose(record.layer1_probs, expected, atol=1e-12)

    def test_sum_and_mean_share_argmax(self):
        rng = np.random.default_rng(43)
        for _ in range(50):
            views = EmbeddingMatrix(unit_rows(rng, 6, 12), normalized=True)
            bank = make_bank(unit_rows(rng, 7, 12))
            shape = ShapeRecord("s", list(range(6)))
            record = first_layer(shape, views, bank, config_for(6, 3))
            assert int(np.argmax(record.layer1_probs)) == record.layer1_top1

    def test_pooled_aggregation(self):
        from mvzero.scoring import compute_logits
        from mvzero.selection import pool_features

        rng = np.random.default_rng(44)
        views = EmbeddingMatrix(unit_rows(rng, 5, 16), normalized=True)
        bank = make_bank(unit_rows(rng, 4, 16))
        shape = ShapeRecord("s", list(range(5)))
        config = config_for(5, aggregation=Aggregation.MEAN_POOL_FEATURES)
        record = first_layer(shape, views, bank, config)
        pooled = pool_features([views.row(i) for i in range(5)], "mean")
        direct = compute_logits(pooled, bank.layer1, 100.0)
        np.testing.assert_array_equal(record.layer1_logits.values, direct.values)


class TestConfidenceGate:
    def test_above_threshold(self):
        record = _record_with_probs([0.97, 0.03])
        assert confidence_gate(record, ClassifierConfig(delta=0.96)) is False

    def test_below_threshold(self):
        record = _record_with_probs([0.50, 0.50])
        assert confidence_gate(record, ClassifierConfig(delta=0.96)) is True

    def test_delta_zero_never_fires(self):
        for probs in ([0.5, 0.5], [0.1] * 10, [0.99, 0.01]):
            record = _record_with_probs(probs)
            assert confidence_gate(record, ClassifierConfig(delta=0.0)) is False

    def test_disabled_never_fires(self):
        record = _record_with_probs([0.5, 0.5])
        config = ClassifierConfig(delta=1.0, hierarchical_enabled=False)
        assert confidence_gate(record, config) is False


def _record_with_probs(probs):
    from mvzero.classifier import PredictionRecord
    from mvzero.scoring import LogitsVector

    values = np.log(np.asarray(probs, dtype=np.float64) + 1e-300)
    return PredictionRecord(
        shape_id="s",
        selected_views=[0],
        view_scores=[],
        layer1_logits=LogitsVector(values, 1.0),
        layer1_probs=np.asarray(probs, dtype=np.float64),
        layer1_top1=int(np.argmax(probs)),
    )


class TestTopKCandidates:
    def _record_with_logits(self, values):
        from mvzero.scoring import LogitsVector

        record = _record_with_probs([1.0 / len(values)] * len(values))
        record.layer1_logits = LogitsVector(np.asarray(values, dtype=float), 1.0)
        record.layer1_top1 = record.layer1_logits.argmax()
        return record

    def test_forced_order(self):
        bank = make_bank(np.eye(4, dtype=np.float32))
        record = self._record_with_logits([5.0, 1.0, 9.0, 3.0])
        assert top_k_candidates(record, bank, 3) == ["c2", "c0", "c3"]

    def test_k_equals_all_classes(self):
        bank = make_bank(np.eye(4, dtype=np.float32))
        record = self._record_with_logits([5.0, 1.0, 9.0, 3.0])
        assert top_k_candidates(record, bank, 4) == ["c2", "c0", "c3", "c1"]

    def test_tie_broken_by_class_index(self):
        bank = make_bank(np.eye(4, dtype=np.float32))
        record = self._record_with_logits([2.0, 7.0, 7.0, 2.0])
        assert top_k_candidates(record, bank, 3) == ["c1", "c2", "c0"]

    def test_matches_sort_oracle(self):
        rng = np.random.default_rng(45)
        bank = make_bank(np.eye(12, dtype=np.float32))
        for _ in range(200):
            values = rng.standard_normal(12)
            record = self._record_with_logits(values)
            k = int(rng.integers(2, 13))
            got = top_k_candidates(record, bank, k)
            oracle = [
                bank.classes[j]
                for j in sorted(range(12), key=lambda j: (-values[j], j))[:k]
            ]
            assert got == oracle
            assert bank.classes[record.layer1_top1] in got

    def test_k_too_large(self):
        bank = make_bank(np.eye(3, dtype=np.float32))
        record = self._record_with_logits([1.0, 2.0, 3.0])
        with pytest.raises(ValueError):
            top_k_candidates(record, bank, 4)


class TestSecondLayer:
    def _setup(self, k_classes=4, dim=8, seed=50):
        rng = np.random.default_rng(seed)
        bank = make_bank(unit_rows(rng, k_classes, dim))
        views = EmbeddingMatrix(unit_rows(rng, 3, dim), normalized=True)
        return rng, bank, views

    def test_view_identical_to_candidate_prompt(self):
        rng, bank, _ = self._setup()
        entry_rows = unit_rows(rng, 2, 8)
        entry = add_entry(bank, ["c0", "c1"], entry_rows)
        views = EmbeddingMatrix(entry_rows[1:2], normalized=True)
        shape = ShapeRecord("s", [0])
        config = config_for(1, temperature=50.0)
        record = first_layer(shape, views, bank, config)
        record.candidates = ["c0", "c1"]
        out = second_layer(record, views, entry, bank, config)
        assert out.refined
        assert out.final_label == bank.class_index["c1"]

    def test_all_rows_equal_tie_to_lowest_index(self):
        rng, bank, views = self._setup()
        row = unit_rows(rng, 1, 8)
        entry = add_entry(bank, ["c2", "c1"], np.repeat(row, 2, axis=0))
        shape = ShapeRecord("s", [0, 1])
        config = config_for(2)
        record = first_layer(shape, views, bank, config)
        record.candidates = ["c2", "c1"]
        out = second_layer(record, views, entry, bank, config)
        assert out.final_label == bank.class_index["c1"]

    def test_double_loop_oracle(self):
        rng, bank, _ = self._setup(k_classes=10, dim=24, seed=51)
        views = EmbeddingMatrix(unit_rows(rng, 6, 24), normalized=True)
        names = ["c1", "c4", "c7"]
        entry = add_entry(bank, names, unit_rows(rng, 3, 24))
        shape = ShapeRecord("s", list(range(6)))
        config = config_for(6, temperature=80.0)
        record = first_layer(shape, views, bank, config)
        record.candidates = list(names)
        out = second_layer(record, views, entry, bank, config)

        tau = 80.0
        for pos, name in enumerate(record.candidates):
            j = entry.candidate_classes.index(name)
            expected = math.fsum(
                tau * float(np.dot(views.row(i).astype(np.float64),
                                   entry.embeddings.row(j).astype(np.float64)))
                for i in record.selected_rows
            )
            assert out.layer2_logits[pos] == pytest.approx(expected, abs=1e-6)

    def test_candidate_mismatch(self):
        rng, bank, views = self._setup()
        entry = add_entry(bank, ["c0", "c1"], unit_rows(rng, 2, 8))
        shape = ShapeRecord("s", [0])
        config = config_for(1)
        record = first_layer(shape, views, bank, config)
        record.candidates = ["c0", "c2"]
        with pytest.raises(CandidateMismatch):
            second_layer(record, views, entry, bank, config)


class TestClassifyShape:
    def test_hierarchical_off_equals_first_layer(self, ref_data):
        config = ClassifierConfig(
            hierarchical_enabled=False,
            selection=SelectionConfig(m_total=20, m_select=4),
        )
        for shape in ref_data.manifest.shapes[:25]:
            record = classify_shape(shape, ref_data.views, ref_data.bank, config)
            direct = first_layer(shape, ref_data.views, ref_data.bank, config)
            assert record.final_label == direct.layer1_top1
            assert not record.refined and record.candidates is None

    def test_planted_unambiguous_shape(self, ref_data):
        config = ClassifierConfig(selection=SelectionConfig(m_total=20, m_select=4))
        easy = [
            s for s in ref_data.manifest.shapes
            if ref_data.populations[s.shape_id] == "easy"
        ][:20]
        for shape in easy:
            record = classify_shape(shape, ref_data.views, ref_data.bank, config)
            assert record.final_label == ref_data.manifest.class_index[shape.label]

    def test_delta_one_refines_everything(self, ref_data):
        config = ClassifierConfig(
            delta=1.0, selection=SelectionConfig(m_total=20, m_select=4)
        )
        for shape in ref_data.manifest.shapes[::17]:
            record = classify_shape(shape, ref_data.views, ref_data.bank, config)
            assert record.refined
            candidate_ids = [ref_data.bank.class_index[c] for c in record.candidates]
            assert record.final_label in candidate_ids
            assert record.layer1_top1 in candidate_ids

    def test_missing_entry_defers(self):
        rng = np.random.default_rng(52)
        bank = make_bank(unit_rows(rng, 6, 16))  # no layer-2 entries at all
        views = EmbeddingMatrix(unit_rows(rng, 4, 16), normalized=True)
        shape = ShapeRecord("s", [0, 1, 2, 3])
        config = config_for(4, delta=1.0)
        record = classify_shape(shape, views, bank, config)
        assert record.deferred_refinement
        assert not record.refined
        assert record.final_label == record.layer1_top1
        assert record.missing_key is not None and "|" in record.missing_key

    def test_monotone_gating(self, ref_data):
        shapes = ref_data.manifest.shapes[::11]
        refined_sets = []
        for delta in (0.2, 0.5, 0.8, 0.96, 1.0):
            config = ClassifierConfig(
                delta=delta, selection=SelectionConfig(m_total=20, m_select=4)
            )
            refined_sets.append(
                {
                    s.shape_id
                    for s in shapes
                    if classify_shape(s, ref_data.views, ref_data.bank, config).refined
                }
            )
        for smaller, larger in zip(refined_sets, refined_sets[1:]):
            assert smaller <= larger

    def test_argmax_invariant_to_view_scaling(self):
        rng = np.random.default_rng(53)
        rows = unit_rows(rng, 5, 16)
        bank = make_bank(unit_rows(rng, 6, 16))
        shape = ShapeRecord("s", list(range(5)))
        config = config_for(5, hierarchical_enabled=False)
        base = first_layer(shape, EmbeddingMatrix(rows), bank, config)
        scaled = first_layer(shape, EmbeddingMatrix(rows * 4.0), bank, config)
        assert base.layer1_top1 == scaled.layer1_top1

    def test_record_serialization_roundtrip(self, ref_data):
        import json

        from mvzero.classifier import record_to_json

        config = ClassifierConfig(selection=SelectionConfig(m_total=20, m_select=4))
        shape = ref_data.manifest.shapes[0]
        record = classify_shape(shape, ref_data.views, ref_data.bank, config)
        doc = json.loads(record_to_json(record))
        assert doc["shape_id"] == shape.shape_id
        assert doc["final_label"] == record.final_label
        assert len(doc["view_scores"]) == 20
