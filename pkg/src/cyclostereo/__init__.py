"""Cyclopean-coordinate stereo geometry toolkit.

Coordinate transforms between image and cyclopean frames, depth and
per-eye bias relations, feature-match cost slices, occlusion and
discontinuity constraint validators, a constraint-respecting scanline
solver, and analytic synthetic scenes for oracle-grade testing.
"""

from .constraints import (
    CellState,
    ConstraintViolations,
    CyclopeanSurface,
    Discontinuity,
    OcclusionReport,
    OcclusionRun,
    check_da_vinci_gc,
    check_opaque_gc,
    cyclopean_gap_width,
    detect_half_occlusions,
    gt_to_cyclopean,
    homogeneity_mask,
    modes_along_d,
    multimodality_map,
)
from .geometry import (
    CameraRig,
    CyclopeanCoord,
    EyeDepths,
    OutOfBoundsError,
    PixelMatch,
    depth_to_disparity,
    disparity_to_depth,
    eye_depths,
    half_grid,
    lateral_offset,
    lr_to_xd,
    xd_to_lr,
)
from .matching import (
    CostSlice,
    DegenerateSliceError,
    DescriptorKind,
    FeatureMap,
    build_cost_slice,
    compute_features,
    fms,
    slice_as_lr_matrix,
)
from .metrics import eval_metrics
from .middlebury import (
    DisparityMap,
    PfmError,
    ScenePair,
    View,
    load_scene,
    parse_calib,
    parse_pfm,
    read_pfm_file,
    write_pfm,
    write_pfm_file,
)
from .scenes import SceneKind, SceneSpec, annotations, generate, multilayer_cells, write_scene
from .solver import (
    ScanlinePath,
    SolveResult,
    SolverParams,
    brute_force_scanline,
    fill_occlusions,
    solve_image,
    solve_scanline,
)

__version__ = "0.1.0"
