import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from proximity_sentinel.classifier import (
    Classification,
    INPUT_SIZE,
    MaskLabel,
    ReferenceBackend,
    attention_pool,
    classify,
    preprocess,
    softmax,
)
from proximity_sentinel.errors import ClassifierError

feature_maps = st.tuples(st.integers(1, 5), st.integers(1, 5), st.integers(1, 8)).flatmap(
    lambda dims: st.tuples(
        arrays(np.float64, dims, elements=st.floats(-100, 100)),
        arrays(np.float64, dims[:2], elements=st.floats(-30, 30)),
    )
)


class TestPreprocess:
    def test_all_zero_crop_maps_to_minus_one(self):
        tensor = preprocess(np.zeros((10, 10, 3), dtype=np.uint8))
        assert tensor.shape == (INPUT_SIZE, INPUT_SIZE, 3)
        assert np.all(tensor == -1.0)

    def test_all_255_crop_maps_to_plus_one(self):
        tensor = preprocess(np.full((4, 7, 3), 255, dtype=np.uint8))
        assert np.all(tensor == 1.0)

    def test_native_size_passes_through_unresized(self):
        crop = np.full((INPUT_SIZE, INPUT_SIZE, 3), 128, dtype=np.uint8)
        tensor = preprocess(crop)
        assert np.all(tensor == 128 / 127.5 - 1.0)

    def test_empty_crop_rejected(self):
        with pytest.raises(ClassifierError):
            preprocess(np.zeros((0, 5, 3), dtype=np.uint8))

    @given(arrays(np.uint8, (9, 13, 3), elements=st.integers(0, 255)))
    def test_range_always_within_unit_interval(self, crop):
        tensor = preprocess(crop)
        assert tensor.min() >= -1.0 and tensor.max() <= 1.0


class TestAttentionPool:
    def test_uniform_logits_equal_spatial_mean(self):
        rng = np.random.default_rng(11)
        feats = rng.normal(size=(3, 3, 2048))
        pooled = attention_pool(feats, np.full((3, 3), 4.2))
        assert pooled == pytest.approx(feats.reshape(-1, 2048).mean(axis=0), rel=1e-12)

    def test_single_cell_is_identity(self):
        feats = np.arange(6, dtype=float).reshape(1, 1, 6)
        assert np.array_equal(attention_pool(feats, np.zeros((1, 1))), feats[0, 0])

    def test_dominant_logit_selects_cell(self):
        # oracle: softmax(10,0,0,0) gives weight 0.9998638187585689 to the
        # first cell, so the output sits within the remaining 1.362e-4 of it
        feats = np.zeros((2, 2, 3))
        feats[0, 0] = (1.0, 2.0, 3.0)
        feats[0, 1] = (-5.0, 0.0, 5.0)
        logits = np.array([[10.0, 0.0], [0.0, 0.0]])
        w0 = math.exp(10.0) / (math.exp(10.0) + 3.0)
        assert w0 == pytest.approx(0.9998638187585689, rel=1e-12)
        pooled = attention_pool(feats, logits)
        spread = np.abs(feats.reshape(-1, 3)).max()
        assert np.all(np.abs(pooled - feats[0, 0]) <= (1 - w0) * 2 * spread)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ClassifierError):
            attention_pool(np.zeros((2, 2, 4)), np.zeros((3, 2)))

    @given(feature_maps)
    def test_weights_normalized_and_shift_invariant(self, case):
        feats, logits = case
        weights = softmax(logits)
        assert weights.min() >= 0
        assert weights.sum() == pytest.approx(1.0, abs=1e-9)
        base = attention_pool(feats, logits)
        shifted = attention_pool(feats, logits + 13.7)
        assert shifted == pytest.approx(base, abs=1e-9 * max(1.0, np.abs(base).max()))

    @given(feature_maps, st.floats(-3, 3), st.floats(-3, 3))
    def test_linear_in_features(self, case, alpha, beta):
        feats, logits = case
        other = np.roll(feats, 1, axis=-1)
        combined = attention_pool(alpha * feats + beta * other, logits)
        separate = alpha * attention_pool(feats, logits) + beta * attention_pool(other, logits)
        assert combined == pytest.approx(separate, abs=1e-9 * max(1.0, np.abs(separate).max()))

    @given(feature_maps)
    def test_convex_hull_bound(self, case):
        feats, logits = case
        pooled = attention_pool(feats, logits)
        flat = feats.reshape(-1, feats.shape[2])
        slack = 1e-12 * np.maximum(1.0, np.abs(flat).max(axis=0))
        assert np.all(pooled >= flat.min(axis=0) - slack)
        assert np.all(pooled <= flat.max(axis=0) + slack)


class TestClassification:
    def test_argmax_and_tie_break(self):
        c = Classification.from_scores([0.5, 0.25, 0.25])
        assert c.label is MaskLabel.WITH_MASK
        tie = Classification.from_scores([0.4, 0.4, 0.2])
        assert tie.label is MaskLabel.WITH_MASK  # enum order breaks ties
        tie2 = Classification.from_scores([0.2, 0.4, 0.4])
        assert tie2.label is MaskLabel.WITHOUT_MASK

    def test_bad_scores_rejected(self):
        with pytest.raises(ClassifierError):
            Classification.from_scores([0.9, 0.2, 0.2])
        with pytest.raises(ClassifierError):
            Classification.from_scores([1.2, -0.1, -0.1])
        with pytest.raises(ClassifierError):
            Classification.from_scores([0.5, 0.5])


class TestReferenceBackend:
    def test_all_zero_crop_golden(self):
        # frozen from reference backend v1: equal channel means give equal
        # logits, so scores are exactly uniform and the tie-break fires
        c = classify(np.zeros((10, 10, 3), dtype=np.uint8), ReferenceBackend())
        assert c.label is MaskLabel.WITH_MASK
        assert c.scores == (
            0.3333333333333333,
            0.3333333333333333,
            0.3333333333333333,
        )

    def test_fill_colors_recover_labels(self):
        backend = ReferenceBackend()
        for channel, label in ((1, MaskLabel.WITH_MASK), (0, MaskLabel.WITHOUT_MASK), (2, MaskLabel.WORN_INCORRECTLY)):
            crop = np.zeros((8, 8, 3), dtype=np.uint8)
            crop[:, :, channel] = 200
            assert classify(crop, backend).label is label

    @given(arrays(np.uint8, (12, 9, 3), elements=st.integers(0, 255)))
    def test_contract_scores_sum_to_one_and_argmax(self, crop):
        c = classify(crop, ReferenceBackend())
        assert sum(c.scores) == pytest.approx(1.0, abs=1e-6)
        assert c.scores[list(MaskLabel).index(c.label)] == max(c.scores)

    def test_repeated_calls_identical(self):
        rng = np.random.default_rng(5)
        crop = rng.integers(0, 256, size=(31, 17, 3), dtype=np.uint8)
        backend = ReferenceBackend()
        first = classify(crop, backend)
        second = classify(crop, backend)
        assert first == second
