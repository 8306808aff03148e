"""Analytic stereo scene generators with exact ground truth.

Scenes are stacks of frontoparallel layers, each a textured strip at one
integer disparity.  Both views render the same quantized texture, the
right view sampling it shifted by the layer disparity, so correspondence
is exact by construction.  GT disparity carries +inf at half-occluded
pixels (including field-of-view strips at the image borders); the true
occlusion runs and discontinuities are also emitted in closed form, with
no image processing involved.

Scenario menu: Step (one depth edge), ThinPole (the attention dilemma:
a pole narrower than half its jump creates transparent-pair cells),
Repetitive (periodic texture, multiple match modes), HomogeneousBand
(a textureless strip where matching carries no information).
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image

from .constraints import Discontinuity, OcclusionReport, OcclusionRun
from .geometry import CameraRig
from .middlebury import (
    DisparityMap,
    ScenePair,
    View,
    atomic_write_bytes,
    format_calib,
    write_pfm,
)


class SceneKind(enum.Enum):
    STEP = "step"
    THIN_POLE = "thin_pole"
    REPETITIVE = "repetitive"
    HOMOGENEOUS_BAND = "homogeneous_band"


@dataclass(frozen=True)
class SceneSpec:
    kind: SceneKind
    width: int = 160
    height: int = 24
    bg_d: int = 4
    fg_d: int = 10
    edge: int = 80  # step: foreground starts here (left-view column)
    pole_pos: int = 80  # thin pole left edge
    pole_width: int = 3
    period: int = 8  # repetitive texture period
    band: tuple[int, int] = (20, 140)  # homogeneous band, left-view columns
    seed: int = 0
    ndisp: Optional[int] = None  # default: fg_d + 4
    focal_px: float = 700.0
    baseline: float = 120.0

    def __post_init__(self) -> None:
        if self.width < 16 or self.height < 1:
            raise ValueError("scene too small")
        if self.kind in (SceneKind.STEP, SceneKind.THIN_POLE):
            if not (0 <= self.bg_d < self.fg_d):
                raise ValueError("need 0 <= background d < foreground d")
            if self.fg_d > self.effective_ndisp:
                raise ValueError("foreground disparity exceeds ndisp")
        if self.bg_d < 0:
            raise ValueError("background disparity must be non-negative")
        if self.bg_d > self.effective_ndisp:
            raise ValueError("background disparity exceeds ndisp")
        if self.kind is SceneKind.THIN_POLE and self.pole_width < 1:
            raise ValueError("pole width must be >= 1")
        if self.kind is SceneKind.REPETITIVE and self.period < 2:
            raise ValueError("period must be >= 2")
        jump = self.fg_d - self.bg_d
        if self.kind is SceneKind.STEP:
            if self.edge - jump - 2 <= self.bg_d or self.edge + 2 >= self.width:
                raise ValueError("step edge too close to the image border for its jump")
        if self.kind is SceneKind.THIN_POLE:
            if self.pole_pos - jump - 2 <= self.bg_d:
                raise ValueError("pole too close to the left border for its jump")
            if self.pole_pos + self.pole_width + 2 >= self.width:
                raise ValueError("pole too close to the right border")

    @property
    def effective_ndisp(self) -> int:
        return self.ndisp if self.ndisp is not None else self.fg_d + 4


@dataclass(frozen=True)
class _Layer:
    d: int
    a: int  # world extent [a, b) parameterized by left-view column
    b: int
    texture: np.ndarray  # (height, b - a) float in [0, 1]


def _noise_texture(rng: np.random.Generator, height: int, width: int) -> np.ndarray:
    # 8-bit quantized so image files round-trip the exact values
    return rng.integers(0, 256, size=(height, width)).astype(np.float64) / 255.0


def _layers_for(spec: SceneSpec, rng: np.random.Generator) -> list[_Layer]:
    n, h = spec.width, spec.height
    if spec.kind is SceneKind.STEP:
        bg = _Layer(spec.bg_d, 0, n + spec.bg_d,
                    _noise_texture(rng, h, n + spec.bg_d))
        fg = _Layer(spec.fg_d, spec.edge, n + spec.fg_d,
                    _noise_texture(rng, h, n + spec.fg_d - spec.edge))
        return [bg, fg]
    if spec.kind is SceneKind.THIN_POLE:
        bg = _Layer(spec.bg_d, 0, n + spec.bg_d,
                    _noise_texture(rng, h, n + spec.bg_d))
        pole = _Layer(spec.fg_d, spec.pole_pos, spec.pole_pos + spec.pole_width,
                      _noise_texture(rng, h, spec.pole_width))
        return [bg, pole]
    if spec.kind is SceneKind.REPETITIVE:
        strip = _noise_texture(rng, h, spec.period)
        reps = int(np.ceil((n + spec.bg_d) / spec.period))
        tex = np.tile(strip, (1, reps))[:, : n + spec.bg_d]
        return [_Layer(spec.bg_d, 0, n + spec.bg_d, tex)]
    if spec.kind is SceneKind.HOMOGENEOUS_BAND:
        tex = _noise_texture(rng, h, n + spec.bg_d)
        a, b = spec.band
        tex[:, a:b] = 0.5
        return [_Layer(spec.bg_d, 0, n + spec.bg_d, tex)]
    raise ValueError(f"unknown scene kind {spec.kind}")


def make_rig(spec: SceneSpec) -> CameraRig:
    return CameraRig(
        focal_px=spec.focal_px, baseline=spec.baseline, doffs=0.0,
        cx=spec.width / 2.0, cy=spec.height / 2.0,
        width=spec.width, height=spec.height, ndisp=spec.effective_ndisp,
    )


def _view_owners(layers: list[_Layer], n: int) -> tuple[np.ndarray, np.ndarray]:
    """Index of the visible (nearest covering) layer per column, per view."""
    order = np.argsort([ly.d for ly in layers], kind="stable")
    owner_left = np.full(n, -1)
    owner_right = np.full(n, -1)
    for li in order:
        ly = layers[li]
        lo, hi = max(ly.a, 0), min(ly.b, n)
        if hi > lo:
            owner_left[lo:hi] = li
        lo, hi = max(ly.a - ly.d, 0), min(ly.b - ly.d, n)
        if hi > lo:
            owner_right[lo:hi] = li
    return owner_left, owner_right


def generate(spec: SceneSpec) -> ScenePair:
    """Render both views, exact GT maps, and closed-form annotations."""
    rng = np.random.default_rng(spec.seed)
    layers = _layers_for(spec, rng)
    n, h = spec.width, spec.height

    # nearest layer per column and view; layers iterated far-to-near
    order = np.argsort([ly.d for ly in layers], kind="stable")
    left_img = np.zeros((h, n))
    right_img = np.zeros((h, n))
    owner_left, owner_right = _view_owners(layers, n)
    true_left = np.zeros(n)
    true_right = np.zeros(n)
    for li in order:
        ly = layers[li]
        lo, hi = max(ly.a, 0), min(ly.b, n)
        if hi > lo:
            left_img[:, lo:hi] = ly.texture[:, lo - ly.a: hi - ly.a]
            true_left[lo:hi] = ly.d
        lo, hi = max(ly.a - ly.d, 0), min(ly.b - ly.d, n)
        if hi > lo:
            right_img[:, lo:hi] = ly.texture[:, lo + ly.d - ly.a: hi + ly.d - ly.a]
            true_right[lo:hi] = ly.d

    # half-occlusion: the pixel's layer is not what the other view shows there
    gt_left = true_left.copy()
    for c in range(n):
        partner = c - int(true_left[c])
        if partner < 0 or partner >= n or owner_right[partner] != owner_left[c]:
            gt_left[c] = np.inf
    gt_right = true_right.copy()
    for c in range(n):
        partner = c + int(true_right[c])
        if partner < 0 or partner >= n or owner_left[partner] != owner_right[c]:
            gt_right[c] = np.inf

    gt_left_map = DisparityMap(View.LEFT, np.tile(gt_left, (h, 1)).astype(np.float32))
    gt_right_map = DisparityMap(View.RIGHT, np.tile(gt_right, (h, 1)).astype(np.float32))
    report = annotations(spec)
    ann = _annotations_dict(spec, report)
    return ScenePair(
        name=f"{spec.kind.value}_seed{spec.seed}",
        left_image=left_img,
        right_image=right_img,
        rig=make_rig(spec),
        gt_left=gt_left_map,
        gt_right=gt_right_map,
        annotations=ann,
    )


def _line_events(spec: SceneSpec) -> tuple[list[OcclusionRun], list[Discontinuity]]:
    """Closed-form occlusion runs and discontinuities of one line."""
    n = spec.width
    bg, fg = spec.bg_d, spec.fg_d
    jump = fg - bg
    runs: list[OcclusionRun] = []
    discs: list[Discontinuity] = []

    def run(view: str, hidden: str, start: int, end: int) -> None:
        if end > start:
            runs.append(OcclusionRun(view=view, hidden_from=hidden, start=start,
                                     end=end, at_border=(start == 0 or end == n)))

    if spec.kind is SceneKind.STEP:
        e = spec.edge
        run("L", "R", 0, bg)  # bg strip beyond the right eye's FOV
        run("L", "R", e - jump, e)  # bg hidden behind the rising edge
        run("R", "L", n - fg, n)  # fg strip beyond the left eye's FOV
        discs.append(Discontinuity("L", e - jump - 1, e, float(bg), float(fg)))
        discs.append(Discontinuity("R", e - fg - 1, e - fg, float(bg), float(fg)))
    elif spec.kind is SceneKind.THIN_POLE:
        p, w = spec.pole_pos, spec.pole_width
        run("L", "R", 0, bg)
        run("R", "L", n - bg, n)
        if w >= jump:  # wide pole: hidden strips abut the pole edges
            run("L", "R", p - jump, p)
            run("R", "L", p + w - fg, p + w - bg)
        else:  # thin pole: hidden strips detach from the pole edges
            run("L", "R", p - jump, p - jump + w)
            run("R", "L", p - bg, p + w - bg)
        if w >= jump:
            discs.append(Discontinuity("L", p - jump - 1, p, float(bg), float(fg)))
            discs.append(Discontinuity("L", p + w - 1, p + w, float(fg), float(bg)))
            discs.append(Discontinuity("R", p - fg - 1, p - fg, float(bg), float(fg)))
            discs.append(Discontinuity("R", p + w - fg - 1, p + w - bg, float(fg), float(bg)))
        else:
            discs.append(Discontinuity("L", p - 1, p, float(bg), float(fg)))
            discs.append(Discontinuity("L", p + w - 1, p + w, float(fg), float(bg)))
            discs.append(Discontinuity("R", p - fg - 1, p - fg, float(bg), float(fg)))
            discs.append(Discontinuity("R", p + w - fg - 1, p + w - fg, float(fg), float(bg)))
    else:  # single plane: only FOV strips (none when bg_d = 0)
        run("L", "R", 0, bg)
        run("R", "L", n - bg, n)
    return runs, discs


def annotations(spec: SceneSpec) -> OcclusionReport:
    """Analytic occlusion report, identical for every line."""
    runs, discs = _line_events(spec)
    report = OcclusionReport(height=spec.height)
    for e in range(spec.height):
        line = report.line(e)
        line.runs = list(runs)
        line.discontinuities = list(discs)
    return report


def multilayer_cells(spec: SceneSpec) -> np.ndarray:
    """Half-grid indices where GT carries two layers (thin-pole dilemma).

    Pole points sit at x = l - fg/2 for l in [p, p+w); a background point
    shares such a cell when it stays binocularly visible, which happens
    under the whole pole once the pole is thinner than half its jump.
    Odd jumps put the two layers on interleaved cells, so no cell carries
    both.
    """
    if spec.kind is not SceneKind.THIN_POLE:
        return np.array([], dtype=np.int64)
    jump = spec.fg_d - spec.bg_d
    p, w = spec.pole_pos, spec.pole_width
    cells = []
    for l in range(p, p + w):
        h_pole = 2 * l - spec.fg_d
        # background contribution at the same cell comes from left column
        # l - (fg-bg)/2 (even jump) via h = 2c - bg
        if (h_pole + spec.bg_d) % 2 == 0:
            c = (h_pole + spec.bg_d) // 2
            hidden_left = p <= c < p + w
            hidden_right = p - jump <= c < p - jump + w
            if 0 <= c < spec.width and not hidden_left and not hidden_right:
                cells.append(h_pole)
    return np.asarray(sorted(cells), dtype=np.int64)


def _annotations_dict(spec: SceneSpec, report: OcclusionReport) -> dict:
    line0 = report.lines[0]
    return {
        "schema_version": 1,
        "kind": spec.kind.value,
        "params": {
            "width": spec.width, "height": spec.height, "bg_d": spec.bg_d,
            "fg_d": spec.fg_d, "edge": spec.edge, "pole_pos": spec.pole_pos,
            "pole_width": spec.pole_width, "period": spec.period,
            "band": list(spec.band), "seed": spec.seed,
            "ndisp": spec.effective_ndisp,
        },
        "per_line_identical": True,
        "runs": [
            {"view": r.view, "side": r.hidden_from, "hidden_from": r.hidden_from,
             "start": r.start, "end": r.end, "width": r.width,
             "at_border": r.at_border}
            for r in line0.runs
        ],
        "discontinuities": [
            {"view": d.view, "lo": d.lo, "hi": d.hi, "lo_d": d.lo_d,
             "hi_d": d.hi_d, "jump": d.jump}
            for d in line0.discontinuities
        ],
        "multilayer_cells": [int(v) for v in multilayer_cells(spec)],
    }


def oracle_cost_slice(spec: SceneSpec, e: int = 0) -> "CostSlice":
    """Geometry-exact cost slice: 0 on binocular surface cells, 1 elsewhere.

    A cell (x, d) costs 0 when the layer at disparity d is visible to
    both eyes along the rays l = x + d/2 and r = x - d/2; a maximal
    binocular column run [c0, c1] covers the ray interval
    [c0 - 1/2, c1 + 1/2], so the half-cells abutting an occluded strip
    stay on the surface (they carry the 45-degree jump endpoints).
    Valid cells off every surface cost exactly 1.  No descriptors are
    involved: this is the evidence an ideal matcher would produce, used
    as the solver's verification oracle.
    """
    from .matching import CostSlice, DescriptorKind

    rng = np.random.default_rng(spec.seed)
    layers = _layers_for(spec, rng)
    n = spec.width
    d_max = spec.effective_ndisp
    owner_left, owner_right = _view_owners(layers, n)

    fm = np.full((2 * n, d_max + 1), np.nan)
    for d in range(d_max + 1):
        h_lo, h_hi = d, 2 * n - 2 - d
        if h_hi >= h_lo:
            fm[h_lo: h_hi + 1, d] = 1.0

    def ray_intervals(owner: np.ndarray, li: int) -> list[tuple[float, float]]:
        out = []
        for start, end in _mask_runs_bool(owner == li):
            out.append((start - 0.5, end - 1 + 0.5))
        return out

    def covers(intervals: list[tuple[float, float]], pos: float) -> bool:
        return any(lo <= pos <= hi for lo, hi in intervals)

    for li, ly in enumerate(layers):
        vis_l = ray_intervals(owner_left, li)
        vis_r = ray_intervals(owner_right, li)
        d = ly.d
        for h in range(d, 2 * n - 1 - d):
            l = (h + d) / 2.0
            r = (h - d) / 2.0
            if 0 <= l <= n - 1 and 0 <= r <= n - 1:
                if covers(vis_l, l) and covers(vis_r, r):
                    fm[h, d] = 0.0

    raw = np.where(np.isfinite(fm), 1.0 - fm, np.nan)
    return CostSlice(e=e, width=n, d_min=0, d_max=d_max, fm=fm, fms_raw=raw,
                     kind=DescriptorKind.CENSUS)


def _mask_runs_bool(mask: np.ndarray):
    padded = np.concatenate(([False], mask, [False]))
    edges = np.flatnonzero(np.diff(padded.astype(np.int8)))
    for i in range(0, len(edges), 2):
        yield int(edges[i]), int(edges[i + 1])


def write_scene(scene: ScenePair, directory: str | Path) -> Path:
    """Emit a Middlebury-layout directory loadable by middlebury.load_scene."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    def save_image(name: str, img: np.ndarray) -> None:
        arr = np.clip(np.round(img * 255.0), 0, 255).astype(np.uint8)
        path = directory / name
        tmp = path.with_name(path.name + ".tmp")
        Image.fromarray(arr, mode="L").save(tmp, format="PNG")
        tmp.replace(path)

    save_image("im0.png", scene.left_image)
    save_image("im1.png", scene.right_image)
    if scene.gt_left is not None:
        atomic_write_bytes(directory / "disp0.pfm", write_pfm(scene.gt_left))
    if scene.gt_right is not None:
        atomic_write_bytes(directory / "disp1.pfm", write_pfm(scene.gt_right))
    atomic_write_bytes(directory / "calib.txt", format_calib(scene.rig).encode("ascii"))
    if scene.annotations is not None:
        payload = json.dumps(scene.annotations, indent=2, sort_keys=True).encode("ascii")
        atomic_write_bytes(directory / "annotations.json", payload)
    return directory
