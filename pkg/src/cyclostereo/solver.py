"""Per-line dynamic program under the opacity and 45-degree jump rules.

Path grammar over the half-grid x axis (one cell per x, left to right):

* Match(d) -> Match(d') with |d - d'| <= continuity band (slanted surface),
* a jump up of size j >= 1 traverses j LOcc cells along the 45-degree
  diagonal: M(h, d) -> LO(h+1, d+1) -> ... -> LO(h+j, d+j) -> M(h+j+1, d+j),
* a jump down symmetrically traverses ROcc cells with d decreasing.

LOcc cells are surface points seen by the left eye only, ROcc by the
right eye only; a jump up (nearer surface beginning on the right)
consumes LOcc cells, a jump down consumes ROcc cells.  The energy is the
sum of matched FM costs plus a constant penalty per occluded cell; the
minimizer is exact, deterministic, and tie-broken by the layer
preference ("far" keeps the lower-disparity surface, "near" the higher).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .constraints import CellState, CyclopeanSurface, homogeneity_mask
from .matching import CostSlice, DegenerateSliceError
from .middlebury import DisparityMap, View

MATCH, LOCC, ROCC = 0, 1, 2
_STATE_TO_CELL = {MATCH: CellState.MATCHED, LOCC: CellState.L_OCCLUDED,
                  ROCC: CellState.R_OCCLUDED}


class InstanceTooLargeError(ValueError):
    """Brute-force enumeration refused: instance beyond its size cap."""


@dataclass(frozen=True)
class SolverParams:
    occlusion_penalty: float = 0.3
    continuity_band: int = 1
    layer_preference: str = "far"  # or "near": tie-break toward nearer surface
    skip_homogeneous: bool = True
    homogeneity_spread: float = 0.05

    def __post_init__(self) -> None:
        if self.occlusion_penalty <= 0:
            raise ValueError("occlusion penalty must be positive")
        if self.continuity_band < 0:
            raise ValueError("continuity band must be >= 0")
        if self.layer_preference not in ("far", "near"):
            raise ValueError("layer_preference must be 'far' or 'near'")


@dataclass
class ScanlinePath:
    """One state per half-grid cell plus the achieved energy."""

    e: int
    width: int
    states: np.ndarray  # uint8: MATCH / LOCC / ROCC per cell
    d: np.ndarray  # int32 state disparity per cell
    total_cost: float

    @property
    def n_cells(self) -> int:
        return 2 * self.width

    def matched_mask(self) -> np.ndarray:
        return self.states == MATCH

    def to_surface(self) -> CyclopeanSurface:
        states = np.zeros(self.n_cells, dtype=np.uint8)
        d = np.full(self.n_cells, np.nan)
        for h in range(self.n_cells):
            states[h] = _STATE_TO_CELL[int(self.states[h])]
            if self.states[h] == MATCH:
                d[h] = self.d[h]
        return CyclopeanSurface(e=self.e, width=self.width, states=states, d=d)


def _cost_grid(cslice: CostSlice) -> np.ndarray:
    c = np.where(np.isfinite(cslice.fm), cslice.fm, np.inf)
    return c.astype(np.float64)


def solve_scanline(cslice: CostSlice, params: SolverParams) -> ScanlinePath:
    """Exact minimum-energy path for one line.

    Forward DP over (x cell, state, d) with constant branching; ties
    resolve by the candidate order fixed by ``layer_preference``, so
    identical inputs give bit-identical paths.
    """
    if cslice.d_min != 0:
        raise ValueError("solver expects a d range starting at 0")
    C = _cost_grid(cslice)
    n_cells, n_d = C.shape
    kappa = params.occlusion_penalty
    band = params.continuity_band
    near = params.layer_preference == "near"

    # candidate predecessor order decides ties; "far" prefers staying on
    # the match track and lower pred d, "near" prefers occlusion chains
    m_offsets = list(range(-band, band + 1))
    if near:
        m_offsets = m_offsets[::-1]

    def shifted(arr: np.ndarray, off: int) -> np.ndarray:
        # out[d] = arr[d + off] with inf padding
        out = np.full(n_d, np.inf)
        if off == 0:
            return arr.copy()
        if off > 0:
            out[: n_d - off] = arr[off:]
        else:
            out[-off:] = arr[: n_d + off]
        return out

    INF = np.inf
    costs = np.full((n_cells, 3, n_d), INF)
    pred_state = np.full((n_cells, 3, n_d), -1, dtype=np.int16)
    pred_d = np.full((n_cells, 3, n_d), -1, dtype=np.int16)

    costs[0, MATCH] = C[0]
    costs[0, LOCC] = kappa
    costs[0, ROCC] = kappa

    for h in range(1, n_cells):
        pm, pl, pr = costs[h - 1]

        # Match: from Match within the band, or landing after a jump
        cand = [shifted(pm, off) for off in m_offsets] + [pl.copy(), pr.copy()]
        cand_state = [MATCH] * len(m_offsets) + [LOCC, ROCC]
        cand_doff = list(m_offsets) + [0, 0]
        if near:
            cand = cand[::-1]
            cand_state = cand_state[::-1]
            cand_doff = cand_doff[::-1]
        stack = np.stack(cand)
        pick = np.argmin(stack, axis=0)
        best = stack[pick, np.arange(n_d)]
        costs[h, MATCH] = C[h] + best
        ps = np.asarray(cand_state, dtype=np.int16)[pick]
        pdo = np.asarray(cand_doff, dtype=np.int16)[pick]
        pred_state[h, MATCH] = ps
        pred_d[h, MATCH] = np.arange(n_d, dtype=np.int16) + pdo

        # LOcc: start of / continuation of an upward jump (pred at d - 1)
        lo_cand = [shifted(pm, -1), shifted(pl, -1)]
        lo_state = [MATCH, LOCC]
        lo_doff = [-1, -1]
        # ROcc: downward jump (pred at d + 1)
        ro_cand = [shifted(pm, +1), shifted(pr, +1)]
        ro_state = [MATCH, ROCC]
        ro_doff = [+1, +1]
        if h == n_cells - 1:
            # x = N - 1/2 has no valid sample at any d, so the path may
            # enter it flat (field-of-view sink); interior cells never can
            lo_cand += [pm.copy(), pl.copy()]
            lo_state += [MATCH, LOCC]
            lo_doff += [0, 0]
            ro_cand += [pm.copy(), pr.copy()]
            ro_state += [MATCH, ROCC]
            ro_doff += [0, 0]
        if near:
            lo_cand, lo_state, lo_doff = lo_cand[::-1], lo_state[::-1], lo_doff[::-1]
            ro_cand, ro_state, ro_doff = ro_cand[::-1], ro_state[::-1], ro_doff[::-1]
        for state, cand, cstate, cdoff in ((LOCC, lo_cand, lo_state, lo_doff),
                                           (ROCC, ro_cand, ro_state, ro_doff)):
            stack = np.stack(cand)
            pick = np.argmin(stack, axis=0)
            costs[h, state] = kappa + stack[pick, np.arange(n_d)]
            pred_state[h, state] = np.asarray(cstate, dtype=np.int16)[pick]
            pred_d[h, state] = (np.arange(n_d, dtype=np.int16)
                                + np.asarray(cdoff, dtype=np.int16)[pick])

    final = costs[-1]
    state_order = (MATCH, LOCC, ROCC) if not near else (ROCC, LOCC, MATCH)
    d_order = range(n_d) if not near else range(n_d - 1, -1, -1)
    best_cost = INF
    best_state = best_d = -1
    for st in state_order:
        for d in d_order:
            if final[st, d] < best_cost:
                best_cost = final[st, d]
                best_state, best_d = st, d
    if not np.isfinite(best_cost):
        raise DegenerateSliceError(f"line {cslice.e}: no feasible path")

    states = np.zeros(n_cells, dtype=np.uint8)
    ds = np.zeros(n_cells, dtype=np.int32)
    st, d = best_state, best_d
    for h in range(n_cells - 1, -1, -1):
        states[h], ds[h] = st, d + cslice.d_min
        if h > 0:
            st, d = int(pred_state[h, st, d]), int(pred_d[h, st, d])
    return ScanlinePath(e=cslice.e, width=cslice.width, states=states, d=ds,
                        total_cost=float(best_cost))


def brute_force_scanline(cslice: CostSlice, params: SolverParams) -> ScanlinePath:
    """Exhaustive path enumeration with cost-bound pruning.

    Verification oracle for tiny instances only (width <= 10 px, d range
    <= 6); walks every constraint-satisfying path depth-first, pruning
    branches that already cost at least the incumbent.
    """
    if cslice.width > 10 or (cslice.d_max - cslice.d_min) > 6:
        raise InstanceTooLargeError("brute force capped at width 10, d range 6")
    if cslice.d_min != 0:
        raise ValueError("solver expects a d range starting at 0")
    C = _cost_grid(cslice)
    n_cells, n_d = C.shape
    kappa = params.occlusion_penalty
    band = params.continuity_band

    best_cost = np.inf
    best_states: Optional[list[int]] = None
    best_ds: Optional[list[int]] = None
    states_stack = [0] * n_cells
    ds_stack = [0] * n_cells

    def successors(st: int, d: int, h: int):
        final = h + 1 == n_cells - 1
        if st == MATCH:
            for off in range(-band, band + 1):
                nd = d + off
                if 0 <= nd < n_d:
                    yield MATCH, nd
            if d + 1 < n_d:
                yield LOCC, d + 1
            if d - 1 >= 0:
                yield ROCC, d - 1
            if final:  # field-of-view sink: flat entry into the last cell
                yield LOCC, d
                yield ROCC, d
        elif st == LOCC:
            if d + 1 < n_d:
                yield LOCC, d + 1
            yield MATCH, d
            if final:
                yield LOCC, d
        else:
            if d - 1 >= 0:
                yield ROCC, d - 1
            yield MATCH, d
            if final:
                yield ROCC, d

    def cell_cost(h: int, st: int, d: int) -> float:
        return C[h, d] if st == MATCH else kappa

    def walk(h: int, st: int, d: int, acc: float) -> None:
        nonlocal best_cost, best_states, best_ds
        states_stack[h] = st
        ds_stack[h] = d
        if h == n_cells - 1:
            if acc < best_cost:
                best_cost = acc
                best_states = states_stack.copy()
                best_ds = ds_stack.copy()
            return
        for nst, nd in successors(st, d, h):
            step = acc + cell_cost(h + 1, nst, nd)
            if step < best_cost and np.isfinite(step):
                walk(h + 1, nst, nd, step)

    for st in (MATCH, LOCC, ROCC):
        for d in range(n_d):
            start = cell_cost(0, st, d)
            if np.isfinite(start) and start < best_cost:
                walk(0, st, d, start)

    if best_states is None:
        raise DegenerateSliceError(f"line {cslice.e}: no feasible path")
    return ScanlinePath(e=cslice.e, width=cslice.width,
                        states=np.asarray(best_states, dtype=np.uint8),
                        d=np.asarray(best_ds, dtype=np.int32) + cslice.d_min,
                        total_cost=float(best_cost))


def fill_occlusions(path: ScanlinePath) -> np.ndarray:
    """Dense d(e, x): occluded cells inherit the farther flanking surface.

    Each occluded run takes the smaller disparity of its two enclosing
    matches (the background side of the jump); boundary runs copy their
    single neighbor.  A line without any match stays NaN.
    """
    n = path.n_cells
    out = np.full(n, np.nan)
    matched = np.flatnonzero(path.states == MATCH)
    if matched.size == 0:
        return out
    out[matched] = path.d[matched]
    prev = None
    idx = 0
    for h in range(n):
        if path.states[h] == MATCH:
            prev = path.d[h]
            idx = np.searchsorted(matched, h)
            continue
        nxt_pos = np.searchsorted(matched, h)
        nxt = path.d[matched[nxt_pos]] if nxt_pos < matched.size else None
        if prev is None:
            out[h] = nxt
        elif nxt is None:
            out[h] = prev
        else:
            out[h] = min(prev, nxt)
    return out


def path_view_rows(path: ScanlinePath, filled: Optional[np.ndarray] = None
                   ) -> tuple[np.ndarray, np.ndarray]:
    """Implied left/right view disparity rows (inf where unseen).

    Matched cells project to both views at l = (h+d)/2 and r = (h-d)/2;
    LOcc cells are left-eye-only content and project only into the left
    map (at the filled disparity), ROcc only into the right map.  Cells
    landing between integer columns are skipped; their neighbors cover
    the integer grid.
    """
    if filled is None:
        filled = fill_occlusions(path)
    n = path.width
    dl = np.full(n, np.inf)
    dr = np.full(n, np.inf)
    # occluded contributions first so matched cells win collisions
    for h in range(path.n_cells):
        st = path.states[h]
        if st == MATCH or not np.isfinite(filled[h]):
            continue
        dv = int(round(float(filled[h])))
        if st == LOCC and (h + dv) % 2 == 0:
            l = (h + dv) // 2
            if 0 <= l < n:
                dl[l] = filled[h]
        elif st == ROCC and (h - dv) % 2 == 0:
            r = (h - dv) // 2
            if 0 <= r < n:
                dr[r] = filled[h]
    for h in range(path.n_cells):
        if path.states[h] != MATCH:
            continue
        d = int(path.d[h])
        if (h + d) % 2 == 0:
            l = (h + d) // 2
            r = (h - d) // 2
            if 0 <= l < n:
                dl[l] = d
            if 0 <= r < n:
                dr[r] = d
    return dl, dr


LABEL_UNKNOWN, LABEL_MATCH, LABEL_LOCC, LABEL_ROCC = 0, 1, 2, 3


@dataclass
class SolveResult:
    """Whole-image solve: cyclopean disparity (2N wide), labels, paths."""

    disparity: DisparityMap
    labels: np.ndarray  # uint8 (H, 2N)
    line_status: list[str]
    paths: list = field(default_factory=list)

    @property
    def label_counts(self) -> dict[str, int]:
        flat = self.labels.ravel()
        return {
            "unknown": int((flat == LABEL_UNKNOWN).sum()),
            "match": int((flat == LABEL_MATCH).sum()),
            "locc": int((flat == LABEL_LOCC).sum()),
            "rocc": int((flat == LABEL_ROCC).sum()),
            "filled": int(((flat == LABEL_LOCC) | (flat == LABEL_ROCC)).sum()),
        }

    def view_maps(self) -> tuple[DisparityMap, DisparityMap]:
        """Implied left/right disparity maps of all solved lines."""
        height = self.labels.shape[0]
        width = self.labels.shape[1] // 2
        dl = np.full((height, width), np.inf, dtype=np.float32)
        dr = np.full((height, width), np.inf, dtype=np.float32)
        for e, path in enumerate(self.paths):
            if path is None:
                continue
            row_l, row_r = path_view_rows(path, self.disparity.values[e].astype(np.float64))
            dl[e] = row_l
            dr[e] = row_r
        return DisparityMap(View.LEFT, dl), DisparityMap(View.RIGHT, dr)


def solve_image(slices: Sequence[Optional[CostSlice]], params: SolverParams,
                workers: Optional[int] = None) -> SolveResult:
    """Independent per-line solves with deterministic merge.

    Degenerate lines, all-homogeneous lines (when skipping is enabled),
    and lines whose solve raises are emitted as unknown; other lines are
    unaffected.
    """
    real = [s for s in slices if s is not None]
    if not real:
        raise ValueError("no usable cost slices")
    width = real[0].width
    height = len(slices)
    disp = np.full((height, 2 * width), np.inf, dtype=np.float32)
    labels = np.zeros((height, 2 * width), dtype=np.uint8)
    status: list[str] = ["missing"] * height
    paths: list[Optional[ScanlinePath]] = [None] * height

    def solve_one(e: int):
        cslice = slices[e]
        if cslice is None:
            return e, None, None, "missing"
        if cslice.degenerate:
            return e, None, None, "degenerate"
        if params.skip_homogeneous:
            mask = homogeneity_mask(cslice, params.homogeneity_spread)
            informative = np.isfinite(cslice.fm).sum(axis=1) >= 2
            if informative.any() and bool(mask[informative].all()):
                return e, None, None, "homogeneous"
        try:
            path = solve_scanline(cslice, params)
        except (DegenerateSliceError, ValueError) as exc:
            return e, None, None, f"error: {exc}"
        return e, path, fill_occlusions(path), "ok"

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(solve_one, range(height)))
    else:
        results = [solve_one(e) for e in range(height)]

    label_of = {MATCH: LABEL_MATCH, LOCC: LABEL_LOCC, ROCC: LABEL_ROCC}
    for e, path, filled, note in sorted(results):
        status[e] = note
        if path is None:
            continue
        paths[e] = path
        disp[e] = np.where(np.isfinite(filled), filled, np.inf)
        labels[e] = [label_of[int(s)] for s in path.states]

    return SolveResult(
        disparity=DisparityMap(View.CYCLOPEAN, disp),
        labels=labels,
        line_status=status,
        paths=paths,
    )
