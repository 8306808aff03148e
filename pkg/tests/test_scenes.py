"""Generator correctness: exact warps, GT conventions, analytic annotations."""

import numpy as np
import pytest

from cyclostereo.constraints import detect_half_occlusions
from cyclostereo.scenes import (
    SceneKind,
    SceneSpec,
    annotations,
    generate,
    multilayer_cells,
    oracle_cost_slice,
)


def step_spec(**kw):
    base = dict(kind=SceneKind.STEP, width=120, height=4, bg_d=4, fg_d=10,
                edge=60, seed=0)
    base.update(kw)
    return SceneSpec(**base)


def events_of(report, e=0):
    line = report.lines[e]
    runs = [(r.view, r.hidden_from, r.start, r.end) for r in line.runs]
    discs = [(d.view, d.lo, d.hi, d.lo_d, d.hi_d) for d in line.discontinuities]
    return runs, discs


class TestStep:
    def test_exact_warp(self):
        scene = generate(step_spec())
        # binocular pixels agree exactly between views after the GT warp
        gl = scene.gt_left.values[0]
        for l in range(120):
            if np.isfinite(gl[l]):
                r = l - int(gl[l])
                np.testing.assert_array_equal(scene.left_image[:, l],
                                              scene.right_image[:, r])

    def test_annotated_events(self):
        runs, discs = events_of(annotations(step_spec()))
        assert ("L", "R", 54, 60) in runs  # hidden strip behind the rising edge
        assert ("L", "R", 0, 4) in runs  # left FOV strip
        assert ("R", "L", 110, 120) in runs  # right FOV strip
        assert ("L", 53, 60, 4.0, 10.0) in discs
        assert ("R", 49, 50, 4.0, 10.0) in discs

    def test_detection_reproduces_annotations(self):
        spec = step_spec()
        scene = generate(spec)
        detected = detect_half_occlusions(scene.gt_left, scene.gt_right)
        annotated = annotations(spec)
        for e in range(spec.height):
            assert events_of(detected, e) == events_of(annotated, e)

    def test_randomized_steps_reproduce_annotations(self):
        rng = np.random.default_rng(42)
        for trial in range(25):
            jump = int(rng.integers(2, 21))
            bg = int(rng.integers(0, 5))
            fg = bg + jump
            edge = int(rng.integers(bg + jump + 4, 90))
            spec = step_spec(width=160, bg_d=bg, fg_d=fg, edge=edge,
                             seed=trial, ndisp=fg + 4)
            scene = generate(spec)
            detected = detect_half_occlusions(scene.gt_left, scene.gt_right)
            assert events_of(detected, 0) == events_of(annotations(spec), 0), trial

    def test_degenerate_zero_jump(self):
        spec = SceneSpec(kind=SceneKind.REPETITIVE, width=80, height=4, bg_d=0,
                         period=8, seed=1)
        runs, discs = events_of(annotations(spec))
        assert runs == [] and discs == []

    def test_texture_determinism(self):
        a = generate(step_spec(seed=9))
        b = generate(step_spec(seed=9))
        np.testing.assert_array_equal(a.left_image, b.left_image)
        np.testing.assert_array_equal(a.right_image, b.right_image)

    def test_geometry_validation(self):
        with pytest.raises(ValueError, match="edge too close"):
            step_spec(edge=8)
        with pytest.raises(ValueError):
            step_spec(bg_d=10, fg_d=4)


class TestThinPole:
    def pole_spec(self, **kw):
        base = dict(kind=SceneKind.THIN_POLE, width=120, height=4, bg_d=0,
                    fg_d=12, pole_pos=60, pole_width=3, seed=2)
        base.update(kw)
        return SceneSpec(**base)

    def test_two_flanking_runs(self):
        runs, discs = events_of(annotations(self.pole_spec()))
        assert ("L", "R", 48, 51) in runs
        assert ("R", "L", 60, 63) in runs
        assert len(discs) == 4 and all(abs(d[4] - d[3]) == 12 for d in discs)

    def test_detection_matches_annotations(self):
        spec = self.pole_spec()
        scene = generate(spec)
        detected = detect_half_occlusions(scene.gt_left, scene.gt_right)
        assert events_of(detected, 0) == events_of(annotations(spec), 0)

    def test_wide_pole_regime(self):
        spec = self.pole_spec(fg_d=6, pole_width=6, pole_pos=80, width=160)
        scene = generate(spec)
        detected = detect_half_occlusions(scene.gt_left, scene.gt_right)
        assert events_of(detected, 0) == events_of(annotations(spec), 0)

    def test_multilayer_cells_present_for_thin(self):
        cells = multilayer_cells(self.pole_spec())
        # pole columns (60..62) at d=12 -> cells 2l - 12
        assert list(cells) == [108, 110, 112]

    def test_multilayer_empty_for_merged_regime(self):
        assert multilayer_cells(self.pole_spec(fg_d=6, pole_width=6,
                                               pole_pos=80, width=160)).size == 0


class TestHomogeneousAndRepetitive:
    def test_homogeneous_band_no_occlusions(self):
        spec = SceneSpec(kind=SceneKind.HOMOGENEOUS_BAND, width=120, height=4,
                         bg_d=0, band=(30, 90), seed=3)
        scene = generate(spec)
        report = detect_half_occlusions(scene.gt_left, scene.gt_right)
        assert report.total_runs == 0
        assert scene.left_image[:, 40:80].std() == 0.0

    def test_repetitive_texture_period(self):
        spec = SceneSpec(kind=SceneKind.REPETITIVE, width=96, height=4, bg_d=2,
                         period=8, seed=4, ndisp=12)
        scene = generate(spec)
        img = scene.left_image
        np.testing.assert_array_equal(img[:, 8:88], img[:, 0:80])


class TestOracleSlice:
    def test_surface_cells_cost_zero(self):
        spec = step_spec()
        cs = oracle_cost_slice(spec)
        # background band cells and foreground band cells
        assert cs.fm[2 * 20 - 4, 4] == 0.0
        assert cs.fm[2 * 80 - 10, 10] == 0.0
        # half-cell extension at the occlusion boundary stays on-surface
        assert cs.fm[2 * 53 - 4 + 1, 4] == 0.0
        # hidden strip is off-surface but valid
        assert cs.fm[2 * 56 - 4, 4] == 1.0

    def test_bounds_invalid(self):
        cs = oracle_cost_slice(step_spec())
        assert np.isnan(cs.fm[0, 5])
        assert np.isnan(cs.fm[2 * 120 - 1, 0])
