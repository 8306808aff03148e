"""Dataset-format IO: PFM disparity maps, calibration files, scene directories.

PFM layout: three header lines (magic, "width height", scale), then
4-byte floats row by row, bottom row first.  Negative scale means
little-endian.  +inf encodes "no data" and is preserved, never zeroed:
occlusion analysis depends on distinguishing unknown from zero.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image

from .geometry import CameraRig

# fixed luma weights keep feature values deterministic across platforms
LUMA_WEIGHTS = (0.299, 0.587, 0.114)


class View(enum.Enum):
    LEFT = "L"
    RIGHT = "R"
    CYCLOPEAN = "XD"


class PfmError(ValueError):
    """Malformed or unsupported PFM content."""


@dataclass
class DisparityMap:
    """Per-pixel real disparity for one view; +inf marks unknown."""

    view: View
    values: np.ndarray  # float32, shape (height, width), row-major top-down

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float32)
        if self.values.ndim != 2:
            raise ValueError(f"disparity grid must be 2-D, got shape {self.values.shape}")

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def known_mask(self) -> np.ndarray:
        return np.isfinite(self.values)

    @property
    def coverage(self) -> float:
        """Fraction of pixels with known disparity."""
        return float(self.known_mask.mean()) if self.values.size else 0.0

    def range_issues(self, rig: CameraRig, slack: float = 1.0) -> list[str]:
        """Sanity findings against a rig (wrong-file wiring detector)."""
        issues = []
        if (self.height, self.width) != (rig.height, rig.width):
            issues.append(
                f"dimensions {self.width}x{self.height} do not match rig {rig.width}x{rig.height}"
            )
        finite = self.values[self.known_mask]
        if finite.size:
            if finite.min() < 0:
                issues.append(f"negative disparity {finite.min():.3f}")
            if finite.max() > rig.ndisp + slack:
                issues.append(f"disparity {finite.max():.3f} exceeds ndisp {rig.ndisp} + {slack}")
        return issues


@dataclass
class ScenePair:
    """A loaded stereo scene: grayscale intensities in [0,1] plus metadata."""

    name: str
    left_image: np.ndarray
    right_image: np.ndarray
    rig: CameraRig
    gt_left: Optional[DisparityMap] = None
    gt_right: Optional[DisparityMap] = None
    annotations: Optional[dict] = None

    @property
    def height(self) -> int:
        return self.left_image.shape[0]

    @property
    def width(self) -> int:
        return self.left_image.shape[1]


def parse_pfm(data: bytes, view: View = View.LEFT) -> DisparityMap:
    """Decode a single-channel PFM byte string into a DisparityMap.

    Rejects 3-channel ("PF") content outright: color maps are never
    disparity, and failing early catches wrong-file wiring.
    """
    pos = 0

    def read_line() -> str:
        nonlocal pos
        end = data.find(b"\n", pos)
        if end < 0:
            raise PfmError("truncated PFM header")
        line = data[pos:end].decode("latin-1").strip()
        pos = end + 1
        return line

    magic = read_line()
    if magic == "PF":
        raise PfmError("3-channel PFM is not a disparity map")
    if magic != "Pf":
        raise PfmError(f"bad PFM magic {magic!r}")
    dims = read_line().split()
    if len(dims) != 2:
        raise PfmError(f"bad dimensions line {dims!r}")
    try:
        width, height = int(dims[0]), int(dims[1])
    except ValueError as exc:
        raise PfmError(f"bad dimensions line {dims!r}") from exc
    if width <= 0 or height <= 0:
        raise PfmError(f"degenerate dimensions {width}x{height}")
    scale = float(read_line())
    if scale == 0.0:
        raise PfmError("zero scale")
    endian = "<" if scale < 0 else ">"

    expected = 4 * width * height
    payload = data[pos:]
    if len(payload) != expected:
        raise PfmError(f"payload is {len(payload)} bytes, expected {expected}")
    flat = np.frombuffer(payload, dtype=endian + "f4")
    grid = flat.reshape(height, width)
    # rows are stored bottom-up
    grid = np.flipud(grid).astype(np.float32)
    return DisparityMap(view=view, values=grid)


def write_pfm(dmap: DisparityMap) -> bytes:
    """Encode in canonical form: scale -1.0, little-endian, bottom-up rows.

    parse_pfm(write_pfm(m)) reproduces m exactly, and write_pfm(parse_pfm(b))
    is byte-identical for canonical-form b.
    """
    values = dmap.values
    if values.size == 0:
        raise PfmError("refusing to write an empty map")
    bad = ~np.isfinite(values) & ~(values == np.inf)
    if bad.any():
        raise PfmError("map contains non-finite values other than the +inf sentinel")
    header = f"Pf\n{dmap.width} {dmap.height}\n-1.0\n".encode("ascii")
    body = np.flipud(values).astype("<f4").tobytes()
    return header + body


def read_pfm_file(path: str | Path, view: View = View.LEFT) -> DisparityMap:
    return parse_pfm(Path(path).read_bytes(), view=view)


def write_pfm_file(path: str | Path, dmap: DisparityMap) -> None:
    atomic_write_bytes(Path(path), write_pfm(dmap))


def atomic_write_bytes(path: Path, payload: bytes) -> None:
    """Write via a temp file + rename so readers never see partial output."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(payload)
    tmp.replace(path)


class CalibError(ValueError):
    """Missing or malformed calibration content."""


def _parse_matrix(text: str) -> list[list[float]]:
    text = text.strip()
    if not (text.startswith("[") and text.endswith("]")):
        raise CalibError(f"malformed matrix {text!r}")
    rows = text[1:-1].split(";")
    try:
        return [[float(v) for v in row.split()] for row in rows]
    except ValueError as exc:
        raise CalibError(f"malformed matrix {text!r}") from exc


REQUIRED_CALIB_KEYS = ("cam0", "cam1", "doffs", "baseline", "width", "height", "ndisp")


def parse_calib(text: str) -> CameraRig:
    """Parse a key=value calibration file into a CameraRig.

    Focal length and principal point come from cam0; a cam0/cam1 focal
    mismatch beyond 1e-6 relative only warns (cam0 wins).
    """
    entries: dict[str, str] = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#") or "=" not in line:
            continue
        key, value = line.split("=", 1)
        entries[key.strip()] = value.strip()
    missing = [k for k in REQUIRED_CALIB_KEYS if k not in entries]
    if missing:
        raise CalibError(f"calibration is missing keys: {', '.join(missing)}")

    cam0 = _parse_matrix(entries["cam0"])
    cam1 = _parse_matrix(entries["cam1"])
    for cam in (cam0, cam1):
        if len(cam) != 3 or any(len(row) != 3 for row in cam):
            raise CalibError("camera matrix is not 3x3")
    f0, f1 = cam0[0][0], cam1[0][0]
    if abs(f0 - f1) > 1e-6 * max(abs(f0), 1.0):
        warnings.warn(f"cam0/cam1 focal mismatch ({f0} vs {f1}); using cam0", stacklevel=2)

    return CameraRig(
        focal_px=f0,
        baseline=float(entries["baseline"]),
        doffs=float(entries["doffs"]),
        cx=cam0[0][2],
        cy=cam0[1][2],
        width=int(float(entries["width"])),
        height=int(float(entries["height"])),
        ndisp=int(float(entries["ndisp"])),
    )


def format_calib(rig: CameraRig) -> str:
    """Render a rig back to the calibration grammar (generator output)."""
    cam = f"[{rig.focal_px} 0 {rig.cx}; 0 {rig.focal_px} {rig.cy}; 0 0 1]"
    return (
        f"cam0={cam}\ncam1={cam}\ndoffs={rig.doffs}\nbaseline={rig.baseline}\n"
        f"width={rig.width}\nheight={rig.height}\nndisp={rig.ndisp}\n"
    )


def load_image_gray(path: str | Path) -> np.ndarray:
    """Load an image as float intensity in [0,1] using fixed luma weights."""
    with Image.open(path) as img:
        arr = np.asarray(img)
    if arr.dtype == np.uint8:
        arr = arr.astype(np.float64) / 255.0
    elif arr.dtype == np.uint16:
        arr = arr.astype(np.float64) / 65535.0
    else:
        arr = arr.astype(np.float64)
    if arr.ndim == 3:
        r, g, b = LUMA_WEIGHTS
        arr = r * arr[..., 0] + g * arr[..., 1] + b * arr[..., 2]
    return np.clip(arr, 0.0, 1.0)


def _find_image(directory: Path, stem: str) -> Path:
    for ext in (".png", ".pgm", ".ppm"):
        candidate = directory / (stem + ext)
        if candidate.exists():
            return candidate
    raise FileNotFoundError(f"no {stem}.png/.pgm/.ppm in {directory}")


def load_scene(directory: str | Path) -> ScenePair:
    """Assemble a scene from a Middlebury-layout directory.

    Expects im0/im1 images and calib.txt; disp0.pfm/disp1.pfm and
    annotations.json are optional.  All components must agree on size.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"scene directory {directory} does not exist")
    rig = parse_calib((directory / "calib.txt").read_text())
    left = load_image_gray(_find_image(directory, "im0"))
    right = load_image_gray(_find_image(directory, "im1"))
    if left.shape != right.shape:
        raise ValueError(f"im0 {left.shape} and im1 {right.shape} differ in size")
    if left.shape != (rig.height, rig.width):
        raise ValueError(f"images {left.shape} do not match calib {rig.height, rig.width}")

    gt_left = gt_right = None
    if (directory / "disp0.pfm").exists():
        gt_left = read_pfm_file(directory / "disp0.pfm", view=View.LEFT)
        if (gt_left.height, gt_left.width) != left.shape:
            raise ValueError("disp0.pfm size does not match images")
    if (directory / "disp1.pfm").exists():
        gt_right = read_pfm_file(directory / "disp1.pfm", view=View.RIGHT)
        if (gt_right.height, gt_right.width) != left.shape:
            raise ValueError("disp1.pfm size does not match images")

    annotations = None
    ann_path = directory / "annotations.json"
    if ann_path.exists():
        import json

        annotations = json.loads(ann_path.read_text())

    return ScenePair(
        name=directory.name,
        left_image=left,
        right_image=right,
        rig=rig,
        gt_left=gt_left,
        gt_right=gt_right,
        annotations=annotations,
    )
