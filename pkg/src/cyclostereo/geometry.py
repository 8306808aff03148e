"""Cyclopean coordinate geometry for rectified stereo pairs.

The cyclopean (XD) frame sits midway between the two cameras.  A match
between left column l and right column r on epipolar line e is described
by the invertible transform

    d = l - r          (disparity)
    x = (l + r) / 2    (cyclopean column)

so integer pixel matches land on a half-integer x grid with 2N positions
per line, twice the column resolution of either image.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PixelMatch:
    """A correspondence (e, l) <-> (e, r) in image pixel coordinates."""

    e: int
    l: float
    r: float

    @property
    def disparity(self) -> float:
        return self.l - self.r


@dataclass(frozen=True)
class CyclopeanCoord:
    """A point (e, x, d) in the cyclopean system."""

    e: int
    x: float
    d: float


@dataclass(frozen=True)
class CameraRig:
    """Calibration of a rectified pair.

    ``doffs`` is the difference of the x principal points (dataset
    convention); depth conversion uses d + doffs, so a rig with doffs=0
    is the plain fB/d pinhole relation.
    """

    focal_px: float
    baseline: float
    doffs: float
    cx: float
    cy: float
    width: int
    height: int
    ndisp: int

    def __post_init__(self) -> None:
        if self.focal_px <= 0:
            raise ValueError(f"focal_px must be positive, got {self.focal_px}")
        if self.baseline <= 0:
            raise ValueError(f"baseline must be positive, got {self.baseline}")
        if self.ndisp <= 0:
            raise ValueError(f"ndisp must be positive, got {self.ndisp}")
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"image extents must be positive, got {self.width}x{self.height}")
        if self.doffs < 0:
            raise ValueError(f"doffs must be non-negative, got {self.doffs}")


@dataclass(frozen=True)
class EyeDepths:
    """Distances to one scene point as measured by each viewpoint.

    d_left**2 - d_cyclopean**2 == (B/2 - X)**2 and the symmetric right-eye
    identity hold exactly; neither per-eye distance is universally the
    larger one.
    """

    d_cyclopean: float
    d_left: float
    d_right: float


class OutOfBoundsError(ValueError):
    """A coordinate left the valid image range."""


def lr_to_xd(m: PixelMatch) -> CyclopeanCoord:
    """Map an (e, l, r) match to cyclopean (e, x, d)."""
    return CyclopeanCoord(e=m.e, x=(m.l + m.r) / 2.0, d=m.l - m.r)


def xd_to_lr(c: CyclopeanCoord, width: int | None = None) -> PixelMatch:
    """Invert lr_to_xd.  If ``width`` is given, reject samples outside [0, width)."""
    l = c.x + c.d / 2.0
    r = c.x - c.d / 2.0
    if r < 0 or l < 0:
        raise OutOfBoundsError(f"match (l={l}, r={r}) has a negative column")
    if width is not None and (l >= width or r >= width):
        raise OutOfBoundsError(f"match (l={l}, r={r}) exceeds image width {width}")
    return PixelMatch(e=c.e, l=l, r=r)


def half_grid(width: int) -> np.ndarray:
    """The 2N cyclopean column positions {0, 1/2, ..., N - 1/2} of one line."""
    return np.arange(2 * width) / 2.0


def on_half_grid(x: float, tol: float = 0.0) -> bool:
    """True when x lies on the half-integer grid (within ``tol``)."""
    return abs(2.0 * x - round(2.0 * x)) <= tol


def is_lattice_coord(c: CyclopeanCoord, tol: float = 0.0) -> bool:
    """True when (x, d) corresponds to integer image columns.

    Equivalent to 2x and d having the same parity: x + d/2 and x - d/2
    are integers.
    """
    l = c.x + c.d / 2.0
    r = c.x - c.d / 2.0
    return abs(l - round(l)) <= tol and abs(r - round(r)) <= tol


def disparity_to_depth(rig: CameraRig, d):
    """Depth Z = f*B / (d + doffs) in the rig's world units.

    Scalar input with non-positive effective disparity returns +inf (the
    at-infinity error value); array input maps such entries to +inf.
    """
    d = np.asarray(d, dtype=np.float64)
    eff = d + rig.doffs
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(eff > 0, rig.focal_px * rig.baseline / np.where(eff > 0, eff, 1.0), np.inf)
    if z.ndim == 0:
        return float(z)
    return z


def depth_to_disparity(rig: CameraRig, z):
    """Inverse of :func:`disparity_to_depth`: d = f*B/Z - doffs.  Requires z > 0."""
    z = np.asarray(z, dtype=np.float64)
    if np.any(z <= 0):
        raise ValueError("depth must be positive")
    d = rig.focal_px * rig.baseline / z - rig.doffs
    if d.ndim == 0:
        return float(d)
    return d


def lateral_offset(rig: CameraRig, x, z):
    """Metric lateral distance X of a point from the cyclopean optical axis.

    Bridges pixel columns to world units so the per-eye depth relations
    stay dimensionally consistent: X = Z * (x - cx) / f.
    """
    x = np.asarray(x, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    out = z * (x - rig.cx) / rig.focal_px
    if out.ndim == 0:
        return float(out)
    return out


def eye_depths(rig: CameraRig, X, z):
    """Per-eye viewing distances for a point at lateral offset X, depth z.

    d_left  = sqrt(z**2 + (B/2 - X)**2)
    d_right = sqrt(z**2 + (B/2 + X)**2)

    The cyclopean depth z is what triangulation (and projector-scanned
    datasets) report; both per-eye distances differ from it, which is the
    depth bias this toolkit quantifies.
    """
    X = np.asarray(X, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if np.any(z <= 0):
        raise ValueError("depth must be positive")
    half_b = rig.baseline / 2.0
    dl = np.hypot(z, half_b - X)
    dr = np.hypot(z, half_b + X)
    if dl.ndim == 0:
        return EyeDepths(d_cyclopean=float(z), d_left=float(dl), d_right=float(dr))
    return EyeDepths(d_cyclopean=z, d_left=dl, d_right=dr)


def per_eye_lateral_offsets(rig: CameraRig, X):
    """Orthogonal-projection offsets of a point as seen from each camera.

    X_l = X - B/2 and X_r = X + B/2, so |X_l - X_r| = B always.
    """
    X = np.asarray(X, dtype=np.float64)
    xl = X - rig.baseline / 2.0
    xr = X + rig.baseline / 2.0
    if xl.ndim == 0:
        return float(xl), float(xr)
    return xl, xr


def match_depth(rig: CameraRig, m: PixelMatch) -> float:
    """Depth of a pixel match via the cyclopean disparity."""
    return disparity_to_depth(rig, m.disparity)
