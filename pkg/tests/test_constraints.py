"""Constraint detectors and validators against analytic scenes."""

import numpy as np
import pytest

from cyclostereo.constraints import (
    CellState,
    check_da_vinci_gc,
    check_opaque_gc,
    cyclopean_gap_width,
    detect_half_occlusions,
    gt_to_cyclopean,
    homogeneity_mask,
    modes_along_d,
    multimodality_map,
)
from cyclostereo.geometry import CameraRig
from cyclostereo.matching import DescriptorKind, build_cost_slice, compute_features
from cyclostereo.middlebury import DisparityMap, View
from cyclostereo.scenes import SceneKind, SceneSpec, annotations, generate, multilayer_cells


def const_map(view, value, w=40, h=3):
    return DisparityMap(view, np.full((h, w), value, dtype=np.float32))


def step_scene(**kw):
    base = dict(kind=SceneKind.STEP, width=120, height=3, bg_d=4, fg_d=10,
                edge=60, seed=0)
    base.update(kw)
    return SceneSpec(**base)


class TestGtToCyclopean:
    def test_constant_disparity_all_matched(self):
        # d == 10 everywhere: every receiving cell is Matched(10)
        gl = const_map(View.LEFT, 10.0)
        gr = const_map(View.RIGHT, 10.0)
        surfs = gt_to_cyclopean(gl, gr)
        for surf in surfs:
            idx = surf.matched_indices()
            assert idx.size > 0
            assert not surf.layers
            assert np.all(surf.d[idx] == 10.0)

    def test_single_view_build(self):
        gl = const_map(View.LEFT, 6.0)
        surfs = gt_to_cyclopean(gl, None)
        assert surfs[0].matched_indices().size > 0

    def test_thin_pole_multilayer_cells(self):
        spec = SceneSpec(kind=SceneKind.THIN_POLE, width=120, height=3, bg_d=0,
                         fg_d=12, pole_pos=60, pole_width=3, seed=1)
        scene = generate(spec)
        surfs = gt_to_cyclopean(scene.gt_left, scene.gt_right)
        expect = set(multilayer_cells(spec).tolist())
        for surf in surfs:
            got = {idx for idx, s in enumerate(surf.states)
                   if s == CellState.MULTI_LAYER}
            assert got == expect

    def test_unknowns_skipped(self):
        gl = const_map(View.LEFT, np.inf)
        surfs = gt_to_cyclopean(gl, const_map(View.RIGHT, np.inf))
        assert all(s.matched_indices().size == 0 for s in surfs)

    def test_rounding_ties_toward_lower_x(self):
        # l=10, d=1 -> h = 19.0 exactly; l=10, d=3 -> h = 17.0; subpixel
        # d=0.5 at l=10 -> h = 19.5, tie -> cell 19
        vals = np.full((1, 40), np.inf, dtype=np.float32)
        vals[0, 10] = 0.5
        surf = gt_to_cyclopean(DisparityMap(View.LEFT, vals), None)[0]
        assert surf.states[19] == CellState.MATCHED


class TestDetectHalfOcclusions:
    def test_constant_scene_empty(self):
        gl = const_map(View.LEFT, 8.0)
        gr = const_map(View.RIGHT, 8.0)
        rep = detect_half_occlusions(gl, gr)
        # only the FOV strip on each side is flagged
        for line in rep.lines.values():
            assert all(r.at_border for r in line.runs)
            assert line.discontinuities == []

    def test_zero_disparity_scene_completely_empty(self):
        rep = detect_half_occlusions(const_map(View.LEFT, 0.0),
                                     const_map(View.RIGHT, 0.0))
        assert rep.total_runs == 0 and rep.total_discontinuities == 0

    def test_all_unknown_empty_report(self):
        rep = detect_half_occlusions(const_map(View.LEFT, np.inf),
                                     const_map(View.RIGHT, np.inf))
        assert rep.total_runs == 0 and rep.total_discontinuities == 0

    def test_step_events(self):
        scene = generate(step_scene())
        rep = detect_half_occlusions(scene.gt_left, scene.gt_right)
        line = rep.lines[0]
        interior = [r for r in line.runs if not r.at_border]
        assert len(interior) == 1
        run = interior[0]
        assert (run.view, run.hidden_from, run.start, run.end) == ("L", "R", 54, 60)
        l_discs = [d for d in line.discontinuities if d.view == "L"]
        assert len(l_discs) == 1 and l_discs[0].jump == 6.0

    def test_mirror_symmetry(self):
        # mirrored scene: views swap and flip; run sides swap, widths survive
        scene = generate(step_scene())
        gl, gr = scene.gt_left.values, scene.gt_right.values
        m_left = DisparityMap(View.LEFT, np.ascontiguousarray(gr[:, ::-1]))
        m_right = DisparityMap(View.RIGHT, np.ascontiguousarray(gl[:, ::-1]))
        rep = detect_half_occlusions(scene.gt_left, scene.gt_right)
        mirrored = detect_half_occlusions(m_left, m_right)
        for e in rep.lines:
            orig = sorted((r.hidden_from, r.width) for r in rep.lines[e].runs)
            flipped = sorted(("L" if r.hidden_from == "R" else "R", r.width)
                             for r in mirrored.lines[e].runs)
            assert orig == flipped


class TestOpaqueGc:
    def test_plane_passes(self):
        surfs = gt_to_cyclopean(const_map(View.LEFT, 10.0),
                                const_map(View.RIGHT, 10.0))
        assert check_opaque_gc(surfs).passes

    def test_thin_pole_violations_under_pole(self):
        spec = SceneSpec(kind=SceneKind.THIN_POLE, width=120, height=3, bg_d=0,
                         fg_d=12, pole_pos=60, pole_width=3, seed=1)
        scene = generate(spec)
        surfs = gt_to_cyclopean(scene.gt_left, scene.gt_right)
        v = check_opaque_gc(surfs)
        expect = multilayer_cells(spec)
        got = sorted({int(2 * x) for (_, x, _) in v.opaque_violations})
        assert got == list(expect)

    def test_tolerance_filters_small_spreads(self):
        vals = np.full((1, 40), np.inf, dtype=np.float32)
        vals[0, 20] = 4.0  # h = 2*20 - 4 = 36
        gl = DisparityMap(View.LEFT, vals)
        vals_r = np.full((1, 40), np.inf, dtype=np.float32)
        vals_r[0, 16] = 4.4  # h = 2*16 + 4.4 = 36.4 -> same cell, spread 0.4
        gr = DisparityMap(View.RIGHT, vals_r)
        surfs = gt_to_cyclopean(gl, gr, tol=0.3)
        assert surfs[0].layers  # multi-layer cell exists
        assert check_opaque_gc(surfs, tol=1.0).passes
        assert not check_opaque_gc(surfs, tol=0.3).passes


class TestDaVinciGc:
    def test_step_zero_mismatches(self):
        scene = generate(step_scene())
        rep = detect_half_occlusions(scene.gt_left, scene.gt_right)
        assert check_da_vinci_gc(rep).passes

    def test_no_events_passes(self):
        rep = detect_half_occlusions(const_map(View.LEFT, 0.0),
                                     const_map(View.RIGHT, 0.0))
        assert check_da_vinci_gc(rep).passes

    def test_corrupted_jump_detected(self):
        # corrupt only the left map's foreground disparity: the jump reads 4
        # while the true occlusion stays width 6 -> one mismatch of 2
        scene = generate(step_scene(height=1))
        gl = scene.gt_left.values.copy()
        gl[0, 60:] = 8.0
        rep = detect_half_occlusions(DisparityMap(View.LEFT, gl),
                                     scene.gt_right, tol=2.5)
        line = rep.lines[0]
        run = [r for r in line.runs if not r.at_border][0]
        assert run.width == 6
        v = check_da_vinci_gc(rep)
        deltas = sorted(m.delta for m in v.davinci_mismatches)
        assert deltas and deltas[-1] == 2.0

    def test_unpaired_interior_occlusion_flagged(self):
        # a hole: unknown pixels with equal flanks, no jump anywhere
        vals = np.full((1, 60), 5.0, dtype=np.float32)
        vals[0, 30:34] = np.inf
        gl = DisparityMap(View.LEFT, vals)
        gr = const_map(View.RIGHT, 5.0, w=60, h=1)
        rep = detect_half_occlusions(gl, gr)
        v = check_da_vinci_gc(rep)
        kinds = {m.kind for m in v.davinci_mismatches}
        assert "unpaired_occlusion" in kinds


class TestCyclopeanGap:
    def test_step_gap_half_jump(self):
        scene = generate(step_scene())
        surfs = gt_to_cyclopean(scene.gt_left, scene.gt_right)
        rep = detect_half_occlusions(scene.gt_left, scene.gt_right)
        disc = [d for d in rep.lines[0].discontinuities if d.view == "L"][0]
        assert cyclopean_gap_width(surfs[0], disc) == 3.0

    def test_fig3_style_count(self):
        # jump 4: occlusion area 4 <-> 2 unseen cyclopean pixel units
        scene = generate(step_scene(bg_d=2, fg_d=6))
        surfs = gt_to_cyclopean(scene.gt_left, scene.gt_right)
        rep = detect_half_occlusions(scene.gt_left, scene.gt_right)
        disc = [d for d in rep.lines[0].discontinuities if d.view == "L"][0]
        assert cyclopean_gap_width(surfs[0], disc) == 2.0

    def test_zero_jump_zero_gap(self):
        from cyclostereo.constraints import Discontinuity

        surfs = gt_to_cyclopean(const_map(View.LEFT, 6.0),
                                const_map(View.RIGHT, 6.0))
        fake = Discontinuity(view="L", lo=19, hi=20, lo_d=6.0, hi_d=6.0)
        assert cyclopean_gap_width(surfs[0], fake) == 0.0


def make_rig(width=120, height=4, ndisp=12):
    return CameraRig(focal_px=700, baseline=120, doffs=0, cx=width / 2,
                     cy=height / 2, width=width, height=height, ndisp=ndisp)


class TestAmbiguityDetectors:
    def test_constant_image_all_flagged(self):
        img = np.full((4, 60), 0.5)
        fm = compute_features(img, DescriptorKind.CENSUS, 3)
        cs = build_cost_slice(fm, fm, 1, make_rig(width=60, ndisp=6))
        mask = homogeneity_mask(cs, 0.05)
        informative = np.isfinite(cs.fm).sum(axis=1) >= 2
        assert mask[informative].all()

    def test_zero_threshold_flags_nothing(self):
        img = np.full((4, 60), 0.5)
        fm = compute_features(img, DescriptorKind.CENSUS, 3)
        cs = build_cost_slice(fm, fm, 1, make_rig(width=60, ndisp=6))
        assert not homogeneity_mask(cs, 0.0).any()

    def test_textured_scene_unflagged(self):
        spec = SceneSpec(kind=SceneKind.REPETITIVE, width=120, height=8, bg_d=0,
                         period=40, seed=7, ndisp=8)  # period > ndisp: no aliasing
        scene = generate(spec)
        fl = compute_features(scene.left_image, DescriptorKind.CENSUS, 5)
        fr = compute_features(scene.right_image, DescriptorKind.CENSUS, 5)
        cs = build_cost_slice(fl, fr, 2, scene.rig)
        mask = homogeneity_mask(cs, 0.05)
        assert mask.mean() < 0.05

    def test_periodic_scene_multimodal(self):
        spec = SceneSpec(kind=SceneKind.REPETITIVE, width=120, height=8, bg_d=2,
                         period=8, seed=8, ndisp=12)
        scene = generate(spec)
        fl = compute_features(scene.left_image, DescriptorKind.CENSUS, 5)
        fr = compute_features(scene.right_image, DescriptorKind.CENSUS, 5)
        cs = build_cost_slice(fl, fr, 2, scene.rig)
        counts = multimodality_map(cs, rel_threshold=0.1, min_separation=4)
        interior = slice(2 * 14, 2 * 104)
        frac_multi = (counts[interior] >= 2).mean()
        assert frac_multi >= 0.9
        # modes spaced by the period
        for x_idx in range(40, 200, 16):
            modes = modes_along_d(cs, x_idx, 0.1, 4)
            if modes.size >= 2:
                assert abs((modes[1] - modes[0]) - 8) <= 1

    def test_aperiodic_scene_unimodal(self):
        spec = SceneSpec(kind=SceneKind.REPETITIVE, width=120, height=8, bg_d=2,
                         period=60, seed=9, ndisp=10)
        scene = generate(spec)
        fl = compute_features(scene.left_image, DescriptorKind.CENSUS, 5)
        fr = compute_features(scene.right_image, DescriptorKind.CENSUS, 5)
        cs = build_cost_slice(fl, fr, 2, scene.rig)
        counts = multimodality_map(cs, rel_threshold=0.05, min_separation=4)
        interior = slice(2 * 14, 2 * 104)
        assert (counts[interior] == 1).mean() >= 0.95
