"""Slice renders, depth-bias reporting, and deterministic serialization.

Heatmaps follow the dark-is-good convention: low FM (a strong match)
renders dark.  All JSON floats are written with 9 significant digits and
sorted keys; images are binary PGM/PPM written atomically, so identical
inputs produce byte-identical artifacts.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .constraints import CyclopeanSurface, OcclusionRun
from .geometry import CameraRig
from .matching import CostSlice, slice_as_lr_matrix
from .middlebury import DisparityMap, ScenePair, atomic_write_bytes

# fixed render palette
INVALID_RGB = (70, 70, 90)
GT_PATH_RGB = (230, 30, 30)
GUTTER_L_RGB = (240, 120, 40)
GUTTER_R_RGB = (40, 120, 240)
GUTTER_PX = 3


def json_ready(obj):
    """Recursively coerce to JSON types; floats keep 9 significant digits."""
    if isinstance(obj, dict):
        return {str(k): json_ready(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [json_ready(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        if not np.isfinite(f):
            return None if f != f else ("inf" if f > 0 else "-inf")
        return float(f"{f:.9g}")
    if isinstance(obj, np.ndarray):
        return [json_ready(v) for v in obj.tolist()]
    return obj


def dumps_json(obj) -> str:
    return json.dumps(json_ready(obj), indent=2, sort_keys=True)


def write_json(path: str | Path, obj) -> None:
    atomic_write_bytes(Path(path), (dumps_json(obj) + "\n").encode("ascii"))


def pgm_bytes(gray: np.ndarray) -> bytes:
    gray = np.asarray(gray, dtype=np.uint8)
    h, w = gray.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + gray.tobytes()


def ppm_bytes(rgb: np.ndarray) -> bytes:
    rgb = np.asarray(rgb, dtype=np.uint8)
    h, w, _ = rgb.shape
    return f"P6\n{w} {h}\n255\n".encode("ascii") + rgb.tobytes()


def lr_heatmap_rgb(cslice: CostSlice,
                   gt_surface: Optional[CyclopeanSurface] = None,
                   runs: Optional[Sequence[OcclusionRun]] = None) -> np.ndarray:
    """LR-space cost image: rows l, columns r, dark = good match.

    Ground-truth matches paint red; occlusion runs mark the left gutter
    (rows, left-view runs) and top gutter (columns, right-view runs).
    """
    matrix = slice_as_lr_matrix(cslice)
    n = matrix.shape[0]
    valid = np.isfinite(matrix)
    gray = np.zeros((n, n), dtype=np.uint8)
    gray[valid] = np.clip(np.round(matrix[valid] * 255.0), 0, 255).astype(np.uint8)
    rgb = np.stack([gray, gray, gray], axis=-1)
    rgb[~valid] = INVALID_RGB

    if runs:
        for run in runs:
            if run.view == "L":
                rgb[run.start: run.end, :GUTTER_PX] = GUTTER_L_RGB
            else:
                rgb[:GUTTER_PX, run.start: run.end] = GUTTER_R_RGB

    if gt_surface is not None:
        for idx in gt_surface.matched_indices():
            ds = gt_surface.layers.get(idx) or (gt_surface.d[idx],)
            for dv in ds:
                h_l = idx + dv
                h_r = idx - dv
                if abs(h_l - round(h_l)) > 1e-9 or round(h_l) % 2 or round(h_r) % 2:
                    continue
                l = int(round(h_l)) // 2
                r = int(round(h_r)) // 2
                if 0 <= l < n and 0 <= r < n:
                    rgb[l, r] = GT_PATH_RGB
    return rgb


def labels_pgm(labels: np.ndarray) -> bytes:
    """Label image with fixed values: unknown 0, match 255, locc 100, rocc 180."""
    lut = np.array([0, 255, 100, 180], dtype=np.uint8)
    return pgm_bytes(lut[labels])


def default_lines(height: int, requested: Optional[Sequence[int]] = None) -> list[int]:
    """Requested epipolar lines, else 128/30/464 clamped into range, deduped."""
    picks = list(requested) if requested else [128, 30, 464]
    out: list[int] = []
    for e in picks:
        e = max(0, min(int(e), height - 1))
        if e not in out:
            out.append(e)
    return out


def compute_bias_report(gt: DisparityMap, rig: CameraRig, scene_name: str = "",
                        n_bins: int = 32) -> dict:
    """Per-pixel per-eye depth bias over all finite-GT pixels.

    Converts disparity to cyclopean depth, bridges to metric lateral
    offset, evaluates both per-eye distances, and reports the relative
    bias distributions plus the algebraic identity residuals
    |(D_eye^2 - Z^2) - (B/2 -+ X)^2| / Z^2.
    """
    values = gt.values.astype(np.float64)
    known = np.isfinite(values)
    eff = values + rig.doffs
    known &= eff > 0
    if not known.any():
        raise ValueError("no usable GT pixels for bias analysis")

    rows, cols = np.nonzero(known)
    d = values[known]
    z = rig.focal_px * rig.baseline / (d + rig.doffs)
    x_cyc = cols - d / 2.0
    X = z * (x_cyc - rig.cx) / rig.focal_px
    half_b = rig.baseline / 2.0
    dl = np.hypot(z, half_b - X)
    dr = np.hypot(z, half_b + X)

    rel_l = (dl - z) / z
    rel_r = (dr - z) / z
    res_l = np.abs((dl**2 - z**2) - (half_b - X) ** 2) / z**2
    res_r = np.abs((dr**2 - z**2) - (half_b + X) ** 2) / z**2

    def distro(rel: np.ndarray) -> dict:
        counts, edges = np.histogram(rel, bins=n_bins)
        k = int(np.argmax(np.abs(rel)))
        return {
            "mean_rel_bias": float(rel.mean()),
            "min_rel_bias": float(rel.min()),
            "max_rel_bias": float(rel.max()),
            "histogram": {"edges": edges, "counts": counts},
            "extremum": {"e": int(rows[k]), "col": int(cols[k]),
                         "rel_bias": float(rel[k])},
        }

    return {
        "schema_version": 1,
        "scene": scene_name,
        "rig": {
            "focal_px": rig.focal_px, "baseline": rig.baseline, "doffs": rig.doffs,
            "cx": rig.cx, "cy": rig.cy, "width": rig.width, "height": rig.height,
            "ndisp": rig.ndisp,
        },
        "n_pixels": int(known.sum()),
        "left": distro(rel_l),
        "right": distro(rel_r),
        "identity_residual": {
            "max_rel": float(max(res_l.max(), res_r.max())),
            "mean_rel": float((res_l.mean() + res_r.mean()) / 2.0),
        },
    }


def scene_feature_slices(scene: ScenePair, kind, window: int, lines: Sequence[int],
                         d_max: Optional[int] = None):
    """Build cost slices for selected lines of a scene (shared feature maps)."""
    from .matching import build_cost_slice, compute_features

    fl = compute_features(scene.left_image, kind, window)
    fr = compute_features(scene.right_image, kind, window)
    out = {}
    for e in lines:
        out[e] = build_cost_slice(fl, fr, e, scene.rig, d_max=d_max)
    return out
