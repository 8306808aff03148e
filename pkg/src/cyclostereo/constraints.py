"""Executable geometric constraints over disparity data.

Conventions (see docs/README):

* An occlusion run's ``view`` is the image whose columns it indexes — the
  eye that *does* see those pixels.  ``hidden_from`` (serialized as
  ``side``) names the eye that cannot: the run [34, 40) of a step whose
  foreground starts at left column 40 lives in left-image columns and is
  hidden from the right eye.
* A discontinuity is a jump between consecutive *finite* samples of one
  view's map, so a jump measured across a run of unknown pixels uses the
  run's finite flanks.
* Unknown (+inf) pixels count as occluded when their line has at least
  one finite value; an all-unknown map yields an empty report.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .matching import CostSlice
from .middlebury import DisparityMap


class CellState(enum.IntEnum):
    EMPTY = 0
    MATCHED = 1
    L_OCCLUDED = 2
    R_OCCLUDED = 3
    MULTI_LAYER = 4


@dataclass
class CyclopeanSurface:
    """Per-line cell record over the half-integer x grid (2N cells)."""

    e: int
    width: int
    states: np.ndarray  # uint8 CellState per half-grid cell
    d: np.ndarray  # float, NaN except where MATCHED
    layers: dict[int, tuple[float, ...]] = field(default_factory=dict)

    @property
    def n_cells(self) -> int:
        return 2 * self.width

    def cell_x(self, idx: int) -> float:
        return idx / 2.0

    def matched_indices(self) -> np.ndarray:
        """Cells carrying surface content (single match or multi-layer)."""
        return np.flatnonzero(
            (self.states == CellState.MATCHED) | (self.states == CellState.MULTI_LAYER)
        )


@dataclass(frozen=True)
class OcclusionRun:
    """Maximal run of half-occluded pixels, in ``view``'s columns."""

    view: str  # 'L' or 'R': whose image columns start/end index
    hidden_from: str  # the eye that cannot see these pixels
    start: int
    end: int  # half-open
    at_border: bool = False

    @property
    def width(self) -> int:
        return self.end - self.start

    @property
    def side(self) -> str:
        return self.hidden_from


@dataclass(frozen=True)
class Discontinuity:
    """Disparity jump between consecutive finite samples of one view."""

    view: str
    lo: int  # column of the left finite flank
    hi: int  # column of the right finite flank
    lo_d: float
    hi_d: float

    @property
    def jump(self) -> float:
        return abs(self.hi_d - self.lo_d)

    @property
    def position(self) -> int:
        return self.lo


@dataclass
class LineOcclusions:
    e: int
    runs: list[OcclusionRun] = field(default_factory=list)
    discontinuities: list[Discontinuity] = field(default_factory=list)


@dataclass
class OcclusionReport:
    height: int
    lines: dict[int, LineOcclusions] = field(default_factory=dict)

    def line(self, e: int) -> LineOcclusions:
        return self.lines.setdefault(e, LineOcclusions(e=e))

    @property
    def total_runs(self) -> int:
        return sum(len(ln.runs) for ln in self.lines.values())

    @property
    def total_discontinuities(self) -> int:
        return sum(len(ln.discontinuities) for ln in self.lines.values())

    def to_json_dict(self) -> dict:
        out = {"schema_version": 1, "height": self.height, "lines": {}}
        for e in sorted(self.lines):
            ln = self.lines[e]
            if not ln.runs and not ln.discontinuities:
                continue
            out["lines"][str(e)] = {
                "runs": [
                    {
                        "view": r.view,
                        "side": r.hidden_from,
                        "hidden_from": r.hidden_from,
                        "start": r.start,
                        "end": r.end,
                        "width": r.width,
                        "at_border": r.at_border,
                    }
                    for r in ln.runs
                ],
                "discontinuities": [
                    {
                        "view": d.view,
                        "position": d.position,
                        "lo": d.lo,
                        "hi": d.hi,
                        "lo_d": float(d.lo_d),
                        "hi_d": float(d.hi_d),
                        "jump": float(d.jump),
                    }
                    for d in ln.discontinuities
                ],
            }
        return out


@dataclass
class DaVinciMismatch:
    kind: str  # jump_width_mismatch | unpaired_discontinuity | unpaired_occlusion
    e: int
    delta: float
    discontinuity: Optional[Discontinuity] = None
    run: Optional[OcclusionRun] = None

    def to_json_dict(self) -> dict:
        out = {"kind": self.kind, "e": self.e, "delta": float(self.delta)}
        if self.discontinuity is not None:
            d = self.discontinuity
            out["discontinuity"] = {"view": d.view, "lo": d.lo, "hi": d.hi,
                                    "jump": float(d.jump)}
        if self.run is not None:
            r = self.run
            out["occlusion"] = {"view": r.view, "side": r.hidden_from,
                                "start": r.start, "end": r.end, "width": r.width}
        return out


@dataclass
class ConstraintViolations:
    opaque_violations: list = field(default_factory=list)  # (e, x, ds tuple)
    davinci_mismatches: list = field(default_factory=list)  # DaVinciMismatch

    @property
    def passes(self) -> bool:
        return not self.opaque_violations and not self.davinci_mismatches

    def to_json_dict(self) -> dict:
        return {
            "schema_version": 1,
            "opaque_violations": [
                {"e": int(e), "x": float(x), "disparities": [float(v) for v in ds]}
                for (e, x, ds) in self.opaque_violations
            ],
            "davinci_mismatches": [m.to_json_dict() for m in self.davinci_mismatches],
            "passes": self.passes,
        }


def _half_grid_index(h_real: np.ndarray) -> np.ndarray:
    """Nearest half-grid cell, ties toward lower x."""
    return np.ceil(h_real - 0.5).astype(np.int64)


def _cluster_sorted(values: list[float], tol: float) -> list[float]:
    """Greedy gap clustering of sorted values; returns one mean per group."""
    groups = []
    start = 0
    for i in range(1, len(values) + 1):
        if i == len(values) or values[i] - values[i - 1] > tol:
            chunk = values[start:i]
            groups.append(sum(chunk) / len(chunk))
            start = i
    return groups


def gt_to_cyclopean(gt_left: Optional[DisparityMap], gt_right: Optional[DisparityMap],
                    tol: float = 1.0) -> list[CyclopeanSurface]:
    """Project GT matches of both views onto the cyclopean grid, per line.

    Each finite left pixel (e, l, d) lands in the cell nearest
    x = l - d/2; right pixels land at x = r + d/2.  Contributions within
    ``tol`` of each other merge into one Matched disparity; wider spreads
    become MultiLayer cells (the transparent-pair state).
    """
    if gt_left is None and gt_right is None:
        raise ValueError("at least one GT map is required")
    ref = gt_left if gt_left is not None else gt_right
    height, width = ref.height, ref.width
    n_cells = 2 * width

    surfaces = []
    for e in range(height):
        buckets: dict[int, list[float]] = {}

        def add(cols: np.ndarray, ds: np.ndarray, sign: int) -> None:
            # sign -1: left view (h = 2l - d); +1: right view (h = 2r + d)
            h = _half_grid_index(2.0 * cols + sign * ds)
            ok = (h >= 0) & (h < n_cells)
            for hi, di in zip(h[ok], ds[ok]):
                buckets.setdefault(int(hi), []).append(float(di))

        if gt_left is not None:
            row = gt_left.values[e]
            cols = np.flatnonzero(np.isfinite(row))
            add(cols.astype(np.float64), row[cols].astype(np.float64), -1)
        if gt_right is not None:
            row = gt_right.values[e]
            cols = np.flatnonzero(np.isfinite(row))
            add(cols.astype(np.float64), row[cols].astype(np.float64), +1)

        states = np.zeros(n_cells, dtype=np.uint8)
        d = np.full(n_cells, np.nan)
        layers: dict[int, tuple[float, ...]] = {}
        for idx, vals in buckets.items():
            reps = _cluster_sorted(sorted(vals), tol)
            if len(reps) == 1:
                states[idx] = CellState.MATCHED
                d[idx] = reps[0]
            else:
                states[idx] = CellState.MULTI_LAYER
                layers[idx] = tuple(reps)
        surfaces.append(CyclopeanSurface(e=e, width=width, states=states, d=d,
                                         layers=layers))
    return surfaces


def detect_half_occlusions(gt_left: DisparityMap, gt_right: DisparityMap,
                           tol: float = 1.0, jump_threshold: float = 2.0,
                           unknown_as_occluded: bool = True) -> OcclusionReport:
    """Left-right consistency occlusion runs plus per-view discontinuities.

    A left pixel is hidden from the right eye when its warped position is
    out of range, lands on unknown data, or disagrees by more than
    ``tol``; symmetrically for right pixels.  Runs are maximal intervals
    of such pixels.
    """
    if gt_left is None or gt_right is None:
        raise ValueError("both GT maps are required")
    if gt_left.values.shape != gt_right.values.shape:
        raise ValueError("GT maps differ in size")
    height, width = gt_left.height, gt_left.width
    report = OcclusionReport(height=height)

    def occluded_mask(src: np.ndarray, dst: np.ndarray, direction: int) -> np.ndarray:
        cols = np.arange(width, dtype=np.float64)[None, :]
        finite = np.isfinite(src)
        with np.errstate(invalid="ignore"):
            warped = np.where(finite, cols + direction * src, 0.0)  # L->R: l-d; R->L: r+d
            idx = np.floor(warped + 0.5).astype(np.int64)
            inside = (idx >= 0) & (idx < width)
            safe = np.clip(idx, 0, width - 1)
            partner = np.take_along_axis(dst, safe, axis=1)
            bad = ~inside | ~np.isfinite(partner) | (np.abs(src - partner) > tol)
        occ = finite & bad
        if unknown_as_occluded:
            has_finite = finite.any(axis=1, keepdims=True)
            occ = occ | (~finite & has_finite)
        return occ

    occ_left = occluded_mask(gt_left.values.astype(np.float64),
                             gt_right.values.astype(np.float64), -1)
    occ_right = occluded_mask(gt_right.values.astype(np.float64),
                              gt_left.values.astype(np.float64), +1)

    for e in range(height):
        line = report.line(e)
        for view, hidden_from, mask in (("L", "R", occ_left[e]), ("R", "L", occ_right[e])):
            for start, end in _mask_runs(mask):
                line.runs.append(OcclusionRun(
                    view=view, hidden_from=hidden_from, start=start, end=end,
                    at_border=(start == 0 or end == width)))
        for view, values in (("L", gt_left.values[e]), ("R", gt_right.values[e])):
            cols = np.flatnonzero(np.isfinite(values))
            if cols.size < 2:
                continue
            vals = values[cols].astype(np.float64)
            jumps = np.abs(np.diff(vals))
            for i in np.flatnonzero(jumps > jump_threshold):
                line.discontinuities.append(Discontinuity(
                    view=view, lo=int(cols[i]), hi=int(cols[i + 1]),
                    lo_d=float(vals[i]), hi_d=float(vals[i + 1])))
    return report


def _mask_runs(mask: np.ndarray):
    """Yield (start, end) of maximal True runs."""
    padded = np.concatenate(([False], mask, [False]))
    edges = np.flatnonzero(np.diff(padded.astype(np.int8)))
    for i in range(0, len(edges), 2):
        yield int(edges[i]), int(edges[i + 1])


def check_opaque_gc(surfaces: Sequence[CyclopeanSurface], tol: float = 1.0,
                    into: Optional[ConstraintViolations] = None) -> ConstraintViolations:
    """Flag cells carrying more than one disparity layer (spread > tol)."""
    out = into if into is not None else ConstraintViolations()
    for surf in surfaces:
        for idx, reps in sorted(surf.layers.items()):
            if max(reps) - min(reps) > tol:
                out.opaque_violations.append((surf.e, surf.cell_x(idx), tuple(reps)))
    return out


def _disc_footprint(disc: Discontinuity, run_view: str) -> tuple[float, float]:
    """The disc's column interval expressed in ``run_view`` coordinates."""
    if disc.view == run_view:
        return (float(disc.lo), float(disc.hi))
    if disc.view == "L":  # warp left columns into right ones
        a, b = disc.lo - disc.lo_d, disc.hi - disc.hi_d
    else:  # right into left
        a, b = disc.lo + disc.lo_d, disc.hi + disc.hi_d
    return (min(a, b), max(a, b))


def _interval_distance(a_lo: float, a_hi: float, b_lo: float, b_hi: float) -> float:
    if a_hi < b_lo:
        return b_lo - a_hi
    if b_hi < a_lo:
        return a_lo - b_hi
    return 0.0


def check_da_vinci_gc(report: OcclusionReport, pixel_tol: float = 1.0,
                      adjacency: float = 1.0, ignore_border_runs: bool = True,
                      into: Optional[ConstraintViolations] = None) -> ConstraintViolations:
    """Pair each discontinuity with its adjacent occlusion run, jump vs width.

    Pairing is geometric: the disc's flank interval is compared against
    each run in the run's own column space (warping across views where
    needed); the nearest run within ``adjacency`` wins, ties toward the
    wider run.  |jump - width| > pixel_tol, unpaired discontinuities, and
    unpaired non-border runs are mismatches.
    """
    out = into if into is not None else ConstraintViolations()
    for e in sorted(report.lines):
        line = report.lines[e]
        paired: set[int] = set()
        for disc in line.discontinuities:
            best = None
            for ri, run in enumerate(line.runs):
                lo, hi = _disc_footprint(disc, run.view)
                dist = _interval_distance(lo, hi, float(run.start), float(run.end - 1))
                if dist > adjacency:
                    continue
                key = (dist, -run.width, ri)
                if best is None or key < best[0]:
                    best = (key, ri, run)
            if best is None:
                out.davinci_mismatches.append(DaVinciMismatch(
                    kind="unpaired_discontinuity", e=e, delta=disc.jump,
                    discontinuity=disc))
                continue
            _, ri, run = best
            paired.add(ri)
            delta = abs(disc.jump - run.width)
            if delta > pixel_tol:
                out.davinci_mismatches.append(DaVinciMismatch(
                    kind="jump_width_mismatch", e=e, delta=delta,
                    discontinuity=disc, run=run))
        for ri, run in enumerate(line.runs):
            if ri in paired:
                continue
            if ignore_border_runs and run.at_border:
                continue
            out.davinci_mismatches.append(DaVinciMismatch(
                kind="unpaired_occlusion", e=e, delta=float(run.width), run=run))
    return out


def cyclopean_gap_width(surface: CyclopeanSurface, disc: Discontinuity) -> float:
    """x-extent of unmatched cells between the two surfaces at a jump.

    Measured as the inter-surface spacing minus the flanking surface's
    own sample spacing, so integer-sampled GT surfaces and dense solver
    paths both report jump/2 on clean opaque steps.
    """
    matched = surface.matched_indices()
    if matched.size < 2:
        return 0.0
    if disc.view == "L":
        x1 = disc.lo - disc.lo_d / 2.0
        x2 = disc.hi - disc.hi_d / 2.0
    else:
        x1 = disc.lo + disc.lo_d / 2.0
        x2 = disc.hi + disc.hi_d / 2.0
    center = (x1 + x2) / 2.0
    xs = matched / 2.0
    right_pos = int(np.searchsorted(xs, center))
    if right_pos <= 0 or right_pos >= xs.size:
        return 0.0
    x_a, x_b = xs[right_pos - 1], xs[right_pos]
    spacing = x_a - xs[right_pos - 2] if right_pos >= 2 else 0.5
    return max(0.0, float((x_b - x_a) - spacing))


def homogeneity_mask(cslice: CostSlice, spread_threshold: float = 0.05) -> np.ndarray:
    """Flag x columns whose costs carry no contrast along d.

    A column is homogeneous when (max - min) of its valid FM values is
    strictly below the threshold; columns with fewer than two valid cells
    have zero spread by definition (so a zero threshold flags nothing).
    """
    fm = cslice.fm
    valid = np.isfinite(fm)
    spread = np.zeros(fm.shape[0])
    any_two = valid.sum(axis=1) >= 2
    with np.errstate(all="ignore"):
        hi = np.nanmax(np.where(valid, fm, -np.inf), axis=1)
        lo = np.nanmin(np.where(valid, fm, np.inf), axis=1)
    spread[any_two] = (hi - lo)[any_two]
    return spread < spread_threshold


def modes_along_d(cslice: CostSlice, x_index: int, rel_threshold: float = 0.1,
                  min_separation: int = 2) -> np.ndarray:
    """d values of near-optimal local cost minima at one x column."""
    col = cslice.fm[x_index]
    valid = np.isfinite(col)
    if valid.sum() == 0:
        return np.array([], dtype=np.int64)
    best = np.nanmin(col)
    candidates = []
    n = col.shape[0]
    for i in range(n):
        if not valid[i]:
            continue
        left = col[i - 1] if i > 0 and valid[i - 1] else np.inf
        right = col[i + 1] if i < n - 1 and valid[i + 1] else np.inf
        if col[i] <= left and col[i] <= right and col[i] <= best + rel_threshold:
            candidates.append(i)
    selected: list[int] = []
    for i in candidates:
        if not selected or i - selected[-1] >= min_separation:
            selected.append(i)
    return np.asarray(selected, dtype=np.int64) + cslice.d_min


def multimodality_map(cslice: CostSlice, rel_threshold: float = 0.1,
                      min_separation: int = 2) -> np.ndarray:
    """Per-x count of near-optimal cost modes; counts > 1 mark ambiguity.

    Homogeneous columns still report counts; homogeneity_mask takes
    precedence downstream when both fire.
    """
    return np.array([
        modes_along_d(cslice, i, rel_threshold, min_separation).size
        for i in range(cslice.fm.shape[0])
    ], dtype=np.int64)
