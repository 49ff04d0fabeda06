import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose
from scipy.spatial.transform import Rotation

from srpedge.geometry import build_grid
from srpedge.metrics import DoaSeries, angular_error, mae, resolves_adjacent_cells, rmsae, score, srp_grid_ratio

X, Y = np.array([1.0, 0, 0]), np.array([0, 1.0, 0])


def rotated_about_z(deg):
    return np.array([math.cos(math.radians(deg)), math.sin(math.radians(deg)), 0.0])


class TestAngularError:
    def test_basic(self):
        assert angular_error(X, X) == 0.0
        assert angular_error(X, Y) == pytest.approx(90.0)
        assert angular_error(X, -X) == pytest.approx(180.0)

    def test_non_unit(self):
        with pytest.raises(ValueError, match="unit"):
            angular_error(2 * X, X)

    def test_near_parallel_is_clamped(self):
        v = X + np.array([0, 1e-12, 0])
        assert np.isfinite(angular_error(v / np.linalg.norm(v), X))


class TestRmsae:
    def test_constant_error(self):
        truth = np.tile(X, (6, 1))
        est = np.tile(rotated_about_z(10), (6, 1))
        assert rmsae(DoaSeries(truth, est)) == pytest.approx(10.0)

    def test_sqrt_200(self):
        s = DoaSeries(np.tile(X, (2, 1)), np.stack([X, rotated_about_z(20)]), vad=[True, False])
        assert rmsae(s) == pytest.approx(math.sqrt(200))
        assert rmsae(s, masked=True) == 0.0
        assert mae(s) == pytest.approx(10.0)

    def test_mask_errors(self):
        s = DoaSeries(np.tile(X, (2, 1)), np.tile(X, (2, 1)))
        with pytest.raises(ValueError):
            rmsae(s, masked=True)
        with pytest.raises(ValueError, match="no active"):
            rmsae(DoaSeries(s.truth, s.estimate, [False, False]), masked=True)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            DoaSeries(np.tile(X, (3, 1)), np.tile(X, (2, 1)))
        with pytest.raises(ValueError):
            DoaSeries(np.tile(X, (2, 1)), np.tile(X, (2, 1)), vad=[True])

    def test_from_angles(self):
        s = DoaSeries.from_angles([[0, 0], [0, 90]], [[0, 10], [0, 90]])
        assert_allclose(s.errors(), [10.0, 0.0], atol=1e-12)

    def test_per_axis_wraps_azimuth(self):
        s = DoaSeries.from_angles([[0, 355]], [[0, 5]])
        assert rmsae(s, combine="per-axis") == pytest.approx(10.0)
        with pytest.raises(ValueError):
            rmsae(s, combine="manhattan")


def random_units(seed, n):
    v = np.random.default_rng(seed).standard_normal((n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 30))
def test_rmsae_bounds_mae(seed, n):
    s = DoaSeries(random_units(seed, n), random_units(seed + 1, n))
    assert rmsae(s) >= mae(s) - 1e-12 >= -1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_rotation_invariance(seed):
    t, e = random_units(seed, 10), random_units(seed ^ 0x5A5A, 10)
    R = Rotation.random(random_state=seed).as_matrix()
    a, b = DoaSeries(t, e), DoaSeries(t @ R.T, e @ R.T)
    assert rmsae(a) == pytest.approx(rmsae(b), abs=1e-6)
    assert mae(a) == pytest.approx(mae(b), abs=1e-6)


def test_all_true_mask_equals_unmasked():
    s = DoaSeries(random_units(1, 8), random_units(2, 8), vad=np.ones(8, bool))
    assert rmsae(s, masked=True) == rmsae(s)


class TestGridRatio:
    def test_examples(self):
        assert srp_grid_ratio(22.5, build_grid(8, 16)) == 1.0
        assert srp_grid_ratio(0.0, build_grid(8, 16)) == 0.0
        assert srp_grid_ratio(45.0, build_grid(4, 8)) == 1.0

    def test_resolution_flag(self):
        g = build_grid(8, 16)
        assert resolves_adjacent_cells(22.5, g)
        assert not resolves_adjacent_cells(22.6, g)

    def test_score(self):
        s = DoaSeries(np.tile(X, (2, 1)), np.stack([X, rotated_about_z(20)]), vad=[True, True])
        out = score(s, build_grid(8, 16))
        assert out["masked"] and out["scored_frames"] == 2
        assert out["srp_grid_ratio"] == pytest.approx(math.sqrt(200) / 22.5)
        assert out["resolves_adjacent_cells"]
