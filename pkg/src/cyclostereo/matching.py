"""Per-pixel descriptors, match similarity, and per-line cost slices.

A cost slice holds, for one epipolar line, the normalized match cost
FM(e, x, d) over the half-integer x grid and integer d range.  Sampling
follows the coordinate transform: the left descriptor is taken at
x + d/2, the right one at x - d/2, with half-column positions obtained
by linear interpolation of the descriptor vectors along the row.
Raw similarities are rescaled per slice so that valid FM values lie in
[0, 1] with minimum exactly 0; smaller means a better match.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geometry import CameraRig


class DescriptorKind(enum.Enum):
    CENSUS = "census"
    ZERO_MEAN_PATCH = "zero_mean_patch"


class DegenerateSliceError(ValueError):
    """A cost slice with no valid cell at all."""


@dataclass
class FeatureMap:
    """Descriptor grid for one image: shape (height, width, bits-or-taps)."""

    kind: DescriptorKind
    window: int
    data: np.ndarray

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


def compute_features(image: np.ndarray, kind: DescriptorKind = DescriptorKind.CENSUS,
                     window: int = 7) -> FeatureMap:
    """Dense window descriptors with edge-clamped borders.

    Census: one float bit per non-center window position, 1.0 where the
    neighbor is strictly brighter than the center.  Zero-mean patch: the
    mean-subtracted, L2-normalized window vector; constant patches keep
    the zero vector so homogeneous regions score 0 against everything.
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise ValueError("expected a 2-D intensity image")
    if window < 3 or window % 2 == 0:
        raise ValueError(f"window must be odd and >= 3, got {window}")
    h, w = image.shape
    if window > h or window > w:
        raise ValueError(f"window {window} larger than image {w}x{h}")

    half = window // 2
    padded = np.pad(image, half, mode="edge")
    patches = np.lib.stride_tricks.sliding_window_view(padded, (window, window))
    patches = patches.reshape(h, w, window * window)

    if kind is DescriptorKind.CENSUS:
        center = image[..., None]
        bits = (patches > center).astype(np.float32)
        center_idx = (window * window) // 2
        keep = np.arange(window * window) != center_idx
        return FeatureMap(kind=kind, window=window, data=np.ascontiguousarray(bits[..., keep]))

    if kind is DescriptorKind.ZERO_MEAN_PATCH:
        vec = patches - patches.mean(axis=-1, keepdims=True)
        norm = np.linalg.norm(vec, axis=-1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            vec = np.where(norm > 0, vec / np.where(norm > 0, norm, 1.0), 0.0)
        return FeatureMap(kind=kind, window=window, data=vec.astype(np.float32))

    raise ValueError(f"unknown descriptor kind {kind}")


def _similarity_rows(kind: DescriptorKind, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise similarity between two stacks of descriptors, larger = better."""
    if kind is DescriptorKind.CENSUS:
        # equals (bits - hamming) / bits for binary vectors and extends
        # continuously to interpolated ones
        return 1.0 - np.abs(a - b).mean(axis=-1)
    return np.einsum("...k,...k->...", a, b)


def _half_column_descriptors(row: np.ndarray) -> np.ndarray:
    """Descriptors at columns 0, 1/2, 1, ... N-1: shape (2N-1, k)."""
    n = row.shape[0]
    out = np.empty((2 * n - 1,) + row.shape[1:], dtype=row.dtype)
    out[0::2] = row
    out[1::2] = 0.5 * (row[:-1] + row[1:])
    return out


def fms(fl: FeatureMap, fr: FeatureMap, e: int, x: float, d: float) -> float:
    """Raw feature-match similarity at one cyclopean coordinate.

    Returns NaN when either sample column falls outside the image.
    """
    n = fl.width
    l = x + d / 2.0
    r = x - d / 2.0
    if not (0.0 <= l <= n - 1 and 0.0 <= r <= n - 1):
        return float("nan")
    dl = _interp_descriptor(fl.data[e], l)
    dr = _interp_descriptor(fr.data[e], r)
    return float(_similarity_rows(fl.kind, dl, dr))


def _interp_descriptor(row: np.ndarray, col: float) -> np.ndarray:
    lo = int(np.floor(col))
    frac = col - lo
    if frac == 0.0:
        return row[lo]
    return (1.0 - frac) * row[lo] + frac * row[lo + 1]


@dataclass
class CostSlice:
    """Match costs of one epipolar line on the (x, d) grid.

    fm and fms_raw have shape (2N, ndisp - d_min + 1); NaN marks cells
    whose left or right sample leaves the image.  ``degenerate`` flags a
    slice whose valid raw scores carry no contrast (FM is then uniformly
    1.0 instead of min-0 normalized).
    """

    e: int
    width: int
    d_min: int
    d_max: int
    fm: np.ndarray
    fms_raw: np.ndarray
    kind: DescriptorKind
    degenerate: bool = False

    @property
    def x_grid(self) -> np.ndarray:
        return np.arange(2 * self.width) / 2.0

    @property
    def d_grid(self) -> np.ndarray:
        return np.arange(self.d_min, self.d_max + 1)

    def valid_mask(self) -> np.ndarray:
        return np.isfinite(self.fm)


def build_cost_slice(fl: FeatureMap, fr: FeatureMap, e: int, rig: CameraRig,
                     d_min: int = 0, d_max: Optional[int] = None) -> CostSlice:
    """Fill the (x, d) cost grid for line e.

    Raw similarities are shifted to be non-negative within the slice and
    divided by their maximum, then flipped: fm = 1 - s/s_max.  The shift
    never changes per-cell argmin ordering.
    """
    if fl.width != fr.width:
        raise ValueError("left/right feature maps disagree on width")
    n = fl.width
    if d_max is None:
        d_max = rig.ndisp
    n_d = d_max - d_min + 1

    left_half = _half_column_descriptors(fl.data[e])
    right_half = _half_column_descriptors(fr.data[e])

    raw = np.full((2 * n, n_d), np.nan, dtype=np.float64)
    for di, d in enumerate(range(d_min, d_max + 1)):
        # half-column indices: left sample at h + d, right at h - d, both
        # within [0, 2n-2]
        h_lo = abs(d)
        h_hi = 2 * n - 2 - abs(d)
        if h_hi < h_lo:
            continue
        a = left_half[h_lo + d: h_hi + d + 1]
        b = right_half[h_lo - d: h_hi - d + 1]
        raw[h_lo: h_hi + 1, di] = _similarity_rows(fl.kind, a, b)

    valid = np.isfinite(raw)
    if not valid.any():
        raise DegenerateSliceError(f"line {e}: no valid (x, d) cell")

    vals = raw[valid]
    shift = max(0.0, -float(vals.min()))
    shifted = raw + shift
    peak = float(vals.max() + shift)
    if peak == 0.0:
        fm = np.where(valid, 1.0, np.nan)
        return CostSlice(e=e, width=n, d_min=d_min, d_max=d_max, fm=fm,
                         fms_raw=raw, kind=fl.kind, degenerate=True)
    fm = np.where(valid, 1.0 - shifted / peak, np.nan)
    return CostSlice(e=e, width=n, d_min=d_min, d_max=d_max, fm=fm,
                     fms_raw=raw, kind=fl.kind)


def slice_as_lr_matrix(cslice: CostSlice, raw: bool = False) -> np.ndarray:
    """Re-index a slice as the (l, r) cost matrix of the line.

    M[l, r] = fm at (x = (l+r)/2, d = l-r); cells with d outside the
    slice's range are NaN.  The matrix only reaches integer (l, r) cells,
    i.e. the even-parity half of the grid.
    """
    n = cslice.width
    src = cslice.fms_raw if raw else cslice.fm
    out = np.full((n, n), np.nan, dtype=np.float64)
    l_idx, r_idx = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    d = l_idx - r_idx
    inside = (d >= cslice.d_min) & (d <= cslice.d_max)
    h = l_idx + r_idx
    out[inside] = src[h[inside], d[inside] - cslice.d_min]
    return out


def lr_matrix_to_grid_cells(matrix: np.ndarray, cslice: CostSlice) -> np.ndarray:
    """Scatter an (l, r) matrix back onto the slice's (x, d) grid (NaN elsewhere)."""
    n = cslice.width
    out = np.full_like(cslice.fm, np.nan)
    l_idx, r_idx = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    d = l_idx - r_idx
    inside = (d >= cslice.d_min) & (d <= cslice.d_max)
    out[(l_idx + r_idx)[inside], d[inside] - cslice.d_min] = matrix[inside]
    return out
