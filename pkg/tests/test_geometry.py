"""Coordinate-transform and depth-relation tests.

Expected values are hand-computed from the defining arithmetic before
being frozen here (e.g. sqrt(2000**2 + 50**2) = 2000.6249023742557).
"""

import math

import numpy as np
import pytest

from cyclostereo.geometry import (
    CameraRig,
    CyclopeanCoord,
    EyeDepths,
    OutOfBoundsError,
    PixelMatch,
    depth_to_disparity,
    disparity_to_depth,
    eye_depths,
    half_grid,
    is_lattice_coord,
    lateral_offset,
    lr_to_xd,
    on_half_grid,
    per_eye_lateral_offsets,
    xd_to_lr,
)


def make_rig(**kw) -> CameraRig:
    base = dict(focal_px=1000.0, baseline=100.0, doffs=0.0, cx=500.0, cy=250.0,
                width=1000, height=500, ndisp=64)
    base.update(kw)
    return CameraRig(**base)


class TestTransform:
    def test_basic_forward(self):
        c = lr_to_xd(PixelMatch(e=0, l=5, r=3))
        assert (c.e, c.x, c.d) == (0, 4.0, 2)

    def test_zero_disparity_identity(self):
        c = lr_to_xd(PixelMatch(e=7, l=7, r=7))
        assert (c.e, c.x, c.d) == (7, 7.0, 0)

    def test_half_integer_x(self):
        c = lr_to_xd(PixelMatch(e=2, l=4, r=1))
        assert (c.e, c.x, c.d) == (2, 2.5, 3)

    def test_basic_inverse(self):
        m = xd_to_lr(CyclopeanCoord(e=0, x=4.0, d=2))
        assert (m.l, m.r) == (5.0, 3.0)

    def test_inverse_half_grid(self):
        m = xd_to_lr(CyclopeanCoord(e=2, x=2.5, d=3))
        assert (m.l, m.r) == (4.0, 1.0)

    def test_inverse_out_of_bounds(self):
        with pytest.raises(OutOfBoundsError):
            xd_to_lr(CyclopeanCoord(e=0, x=0.0, d=1))  # r = -0.5

    def test_inverse_width_check(self):
        with pytest.raises(OutOfBoundsError):
            xd_to_lr(CyclopeanCoord(e=0, x=10.0, d=2), width=10)  # l = 11

    def test_round_trip_exact_64(self):
        # integer-exact over the full 64x64 (l, r) grid
        for l in range(64):
            for r in range(64):
                m = xd_to_lr(lr_to_xd(PixelMatch(e=0, l=l, r=r)))
                assert m.l == l and m.r == r

    def test_parity_lands_on_half_grid(self):
        rng = np.random.default_rng(7)
        for _ in range(500):
            l, r = rng.integers(0, 2**15, size=2)
            c = lr_to_xd(PixelMatch(e=0, l=int(l), r=int(r)))
            assert on_half_grid(c.x)
            assert (2 * c.x + c.d) % 2 == 0
            assert is_lattice_coord(c)

    def test_half_grid_cardinality(self):
        g = half_grid(64)
        assert len(g) == 128
        assert g[0] == 0.0 and g[-1] == 63.5
        assert np.all(np.diff(g) == 0.5)


class TestDepth:
    def test_direct_value(self):
        assert disparity_to_depth(make_rig(), 50) == 2000.0

    def test_zero_disparity_at_infinity(self):
        assert disparity_to_depth(make_rig(), 0) == math.inf

    def test_negative_effective_disparity(self):
        assert disparity_to_depth(make_rig(), -3) == math.inf

    def test_doffs_enters_denominator(self):
        rig = make_rig(doffs=10.0)
        assert disparity_to_depth(rig, 40) == pytest.approx(1000.0 * 100.0 / 50.0)

    def test_fixture_style_literals(self):
        # dataset-style calibration: Z = baseline * f / (d + doffs)
        rig = make_rig(focal_px=3979.911, baseline=193.001, doffs=124.343,
                       cx=1244.772, cy=1019.507, width=2964, height=2000, ndisp=270)
        assert disparity_to_depth(rig, 100) == pytest.approx(3423.894674275551, rel=1e-12)

    def test_inverse_direct(self):
        assert depth_to_disparity(make_rig(), 2000.0) == pytest.approx(50.0)

    def test_far_limit(self):
        assert depth_to_disparity(make_rig(), 1e15) == pytest.approx(0.0, abs=1e-6)

    def test_nonpositive_depth_rejected(self):
        with pytest.raises(ValueError):
            depth_to_disparity(make_rig(), 0.0)

    def test_round_trip_property(self):
        rig = make_rig(doffs=3.5)
        rng = np.random.default_rng(11)
        d = rng.uniform(1e-6, rig.ndisp, size=1000)
        back = depth_to_disparity(rig, disparity_to_depth(rig, d))
        np.testing.assert_allclose(back, d, rtol=1e-9)

    def test_strictly_decreasing(self):
        rig = make_rig()
        d = np.linspace(0.5, 64, 400)
        z = disparity_to_depth(rig, d)
        assert np.all(np.diff(z) < 0)


class TestEyeDepths:
    def test_on_axis_symmetry(self):
        ed = eye_depths(make_rig(), X=0.0, z=2000.0)
        expect = math.hypot(2000.0, 50.0)  # = 2000.6249023742557
        assert ed.d_left == pytest.approx(expect, rel=1e-15)
        assert ed.d_right == pytest.approx(expect, rel=1e-15)
        assert ed.d_cyclopean == 2000.0

    def test_point_on_left_eye_axis(self):
        ed = eye_depths(make_rig(), X=50.0, z=2000.0)
        assert ed.d_left == 2000.0
        assert ed.d_right == pytest.approx(math.hypot(2000.0, 100.0), rel=1e-15)

    def test_identity_sweep(self):
        rng = np.random.default_rng(3)
        for _ in range(2000):
            b = rng.uniform(10, 200)
            x = rng.uniform(-500, 500)
            z = rng.uniform(100, 10000)
            rig = make_rig(baseline=b)
            ed = eye_depths(rig, X=x, z=z)
            assert abs((ed.d_left**2 - z**2) - (b / 2 - x) ** 2) <= 1e-9 * z**2
            assert abs((ed.d_right**2 - z**2) - (b / 2 + x) ** 2) <= 1e-9 * z**2

    def test_vectorized(self):
        rig = make_rig()
        ed = eye_depths(rig, X=np.array([0.0, 50.0]), z=np.array([2000.0, 2000.0]))
        assert isinstance(ed, EyeDepths)
        assert ed.d_left[1] == 2000.0


class TestLateralOffset:
    def test_on_axis(self):
        assert lateral_offset(make_rig(), x=500.0, z=1234.0) == 0.0

    def test_similar_triangles(self):
        assert lateral_offset(make_rig(), x=600.0, z=2000.0) == pytest.approx(200.0)

    def test_per_eye_offsets_span_baseline(self):
        rig = make_rig()
        rng = np.random.default_rng(5)
        for _ in range(200):
            X = rng.uniform(-300, 300)
            xl, xr = per_eye_lateral_offsets(rig, X)
            assert abs(xl - xr) == pytest.approx(rig.baseline, rel=1e-12)


class TestRigValidation:
    @pytest.mark.parametrize("field,value", [
        ("focal_px", 0.0), ("baseline", -1.0), ("ndisp", 0),
        ("width", 0), ("height", -5), ("doffs", -0.1),
    ])
    def test_bad_field_rejected(self, field, value):
        with pytest.raises(ValueError):
            make_rig(**{field: value})
