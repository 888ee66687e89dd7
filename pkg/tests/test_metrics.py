"""Labeling, reconstruction error and segmentation error."""

import numpy as np
import pytest

from srsct import labels_from, reconstruction_error, segmentation_error
from srsct.kernels import normalize_to_simplex


class TestLabelsFrom:
    def test_plain_argmax(self):
        assert labels_from(np.array([[0.1, 0.8, 0.1]]))[0] == 2

    def test_tie_takes_smaller_index(self):
        assert labels_from(np.array([[0.5, 0.5]]))[0] == 1

    def test_invariant_under_score_scaling(self):
        # labels of the normalized field do not change when the raw scores
        # are scaled by any positive factor (clamp inactive)
        rng = np.random.default_rng(5)
        scores = rng.uniform(0.2, 2.0, size=(40, 4))
        base = labels_from(normalize_to_simplex(scores, np.zeros_like(scores), 1.0, 1e-8))
        for c in (0.3, 2.0, 17.5):
            scaled = labels_from(normalize_to_simplex(c * scores,
                                                      np.zeros_like(scores), 1.0, 1e-8))
            np.testing.assert_array_equal(base, scaled)


class TestReconstructionError:
    def test_exact_match(self):
        x = np.array([1.0, 2.0])
        assert reconstruction_error(x, x) == 0.0

    def test_double_image(self):
        x_true = np.array([1.0, -2.0, 0.5])
        assert reconstruction_error(2 * x_true, x_true) == pytest.approx(0.5)

    def test_scaling_identity(self):
        x_true = np.array([3.0, 4.0, -1.0])
        for c in (0.5, 1.5, 3.0):
            expected = abs(c - 1) / c
            assert reconstruction_error(c * x_true, x_true) == pytest.approx(expected)

    def test_zero_reconstruction_rejected(self):
        with pytest.raises(ValueError):
            reconstruction_error(np.zeros(4), np.ones(4))


class TestSegmentationError:
    def test_identical(self):
        labels = np.array([1, 2, 3, 1])
        assert segmentation_error(labels, labels) == 0.0

    def test_one_in_four(self):
        assert segmentation_error(np.array([1, 2, 3, 1]),
                                  np.array([1, 2, 3, 2])) == 0.25

    def test_symmetry(self):
        rng = np.random.default_rng(0)
        a = rng.integers(1, 4, size=50)
        b = rng.integers(1, 4, size=50)
        assert segmentation_error(a, b) == segmentation_error(b, a)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            segmentation_error(np.array([1, 2]), np.array([1, 2, 3]))
