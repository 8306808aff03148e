"""Command-line front end.

Subcommands: gen (synthetic scenes), slice (LR heatmaps + JSON),
validate (constraint checks, exit 0/1/2), solve (scanline solver +
metrics), bias (per-eye depth bias report), eval (PFM vs PFM metrics).
A JSON config file can preload any long-form flag; explicit flags win.

Exit codes: 0 success/pass, 1 validation budget exceeded, 2 usage or IO
error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .constraints import (
    ConstraintViolations,
    check_da_vinci_gc,
    check_opaque_gc,
    detect_half_occlusions,
    gt_to_cyclopean,
    homogeneity_mask,
    multimodality_map,
)
from .matching import DescriptorKind, DegenerateSliceError, build_cost_slice, compute_features
from .metrics import eval_metrics
from .middlebury import (
    DisparityMap,
    ScenePair,
    View,
    atomic_write_bytes,
    load_scene,
    read_pfm_file,
    write_pfm_file,
)
from .reports import (
    compute_bias_report,
    default_lines,
    dumps_json,
    labels_pgm,
    lr_heatmap_rgb,
    ppm_bytes,
    write_json,
)
from .scenes import SceneKind, SceneSpec, generate, write_scene
from .solver import SolverParams, solve_image


@dataclass
class RunConfig:
    """Resolved options of one CLI invocation."""

    scene: Optional[Path] = None
    out_dir: Path = Path("out")
    descriptor: DescriptorKind = DescriptorKind.CENSUS
    window: int = 7
    lines: Optional[list[int]] = None  # None: spec defaults clamped to height
    d_max: Optional[int] = None
    solver: SolverParams = field(default_factory=SolverParams)
    lrc_tol: float = 1.0
    jump_threshold: float = 2.0
    pixel_tol: float = 1.0
    opaque_tol: float = 1.0
    budget_opaque: int = 0
    budget_davinci: int = 0
    spread_threshold: float = 0.05
    mm_rel_threshold: float = 0.1
    mm_min_separation: int = 2
    workers: Optional[int] = None


def _load_scene_checked(cfg: RunConfig) -> ScenePair:
    if cfg.scene is None:
        raise FileNotFoundError("no scene directory given")
    return load_scene(cfg.scene)


def cmd_slice(cfg: RunConfig) -> dict:
    """Render LR-space heatmaps with GT/occlusion overlays for chosen lines."""
    scene = _load_scene_checked(cfg)
    lines = default_lines(scene.height, cfg.lines)
    for e in lines:
        if not (0 <= e < scene.height):
            raise ValueError(f"line {e} outside image height {scene.height}")
    cfg.out_dir.mkdir(parents=True, exist_ok=True)

    fl = compute_features(scene.left_image, cfg.descriptor, cfg.window)
    fr = compute_features(scene.right_image, cfg.descriptor, cfg.window)

    has_gt = scene.gt_left is not None and scene.gt_right is not None
    surfaces = report = None
    if has_gt:
        surfaces = gt_to_cyclopean(scene.gt_left, scene.gt_right, tol=cfg.opaque_tol)
        report = detect_half_occlusions(scene.gt_left, scene.gt_right,
                                        tol=cfg.lrc_tol,
                                        jump_threshold=cfg.jump_threshold)

    entries = []
    for e in lines:
        entry: dict = {"e": e, "gt_overlay": has_gt}
        try:
            cslice = build_cost_slice(fl, fr, e, scene.rig, d_max=cfg.d_max)
        except DegenerateSliceError as exc:
            entry.update(heatmap="", degenerate=True, valid_fraction=0.0,
                         warning=str(exc))
            entries.append(entry)
            continue
        surf = surfaces[e] if surfaces else None
        runs = report.lines[e].runs if report and e in report.lines else None
        rgb = lr_heatmap_rgb(cslice, gt_surface=surf, runs=runs)
        name = f"slice_e{e:04d}.ppm"
        atomic_write_bytes(cfg.out_dir / name, ppm_bytes(rgb))
        hom = homogeneity_mask(cslice, cfg.spread_threshold)
        modes = multimodality_map(cslice, cfg.mm_rel_threshold, cfg.mm_min_separation)
        entry.update(
            heatmap=name,
            degenerate=cslice.degenerate,
            valid_fraction=float(np.isfinite(cslice.fm).mean()),
            homogeneous_columns=int(hom.sum()),
            ambiguous_columns=int(((modes > 1) & ~hom).sum()),
        )
        if not has_gt:
            entry["warning"] = "no ground truth; overlay omitted"
        entries.append(entry)

    out = {
        "schema_version": 1,
        "scene": scene.name,
        "descriptor": cfg.descriptor.value,
        "window": cfg.window,
        "lines": entries,
    }
    write_json(cfg.out_dir / "slice_report.json", out)
    return out


def cmd_validate(cfg: RunConfig) -> tuple[dict, int]:
    """Run Opaque-GC and Da Vinci-GC over a scene's GT; exit 0 iff within budget."""
    scene = _load_scene_checked(cfg)
    if scene.gt_left is None or scene.gt_right is None:
        raise FileNotFoundError("validate requires disp0.pfm and disp1.pfm")
    surfaces = gt_to_cyclopean(scene.gt_left, scene.gt_right, tol=cfg.opaque_tol)
    report = detect_half_occlusions(scene.gt_left, scene.gt_right,
                                    tol=cfg.lrc_tol,
                                    jump_threshold=cfg.jump_threshold)
    violations = ConstraintViolations()
    check_opaque_gc(surfaces, tol=cfg.opaque_tol, into=violations)
    check_da_vinci_gc(report, pixel_tol=cfg.pixel_tol, into=violations)

    n_opaque = len(violations.opaque_violations)
    n_davinci = len(violations.davinci_mismatches)
    passes = n_opaque <= cfg.budget_opaque and n_davinci <= cfg.budget_davinci
    out = {
        "schema_version": 1,
        "scene": scene.name,
        "tolerances": {"lrc_tol": cfg.lrc_tol, "jump_threshold": cfg.jump_threshold,
                       "pixel_tol": cfg.pixel_tol, "opaque_tol": cfg.opaque_tol},
        "budgets": {"opaque": cfg.budget_opaque, "davinci": cfg.budget_davinci},
        "counts": {
            "opaque_violations": n_opaque,
            "davinci_mismatches": n_davinci,
            "occlusion_runs": report.total_runs,
            "discontinuities": report.total_discontinuities,
        },
        "violations": violations.to_json_dict(),
        "passes": passes,
    }
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    write_json(cfg.out_dir / "validate.json", out)
    return out, 0 if passes else 1


def cmd_solve(cfg: RunConfig) -> dict:
    """Feature matching + per-line solve; writes PFM, labels, metrics JSON."""
    scene = _load_scene_checked(cfg)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    fl = compute_features(scene.left_image, cfg.descriptor, cfg.window)
    fr = compute_features(scene.right_image, cfg.descriptor, cfg.window)
    slices = []
    for e in range(scene.height):
        try:
            slices.append(build_cost_slice(fl, fr, e, scene.rig, d_max=cfg.d_max))
        except DegenerateSliceError:
            slices.append(None)
    result = solve_image(slices, cfg.solver, workers=cfg.workers)

    write_pfm_file(cfg.out_dir / "disparity_xd.pfm", result.disparity)
    atomic_write_bytes(cfg.out_dir / "labels.pgm", labels_pgm(result.labels))

    status_summary: dict[str, int] = {}
    for s in result.line_status:
        key = s.split(":")[0]
        status_summary[key] = status_summary.get(key, 0) + 1

    out = {
        "schema_version": 1,
        "scene": scene.name,
        "params": {
            "descriptor": cfg.descriptor.value,
            "window": cfg.window,
            "occlusion_penalty": cfg.solver.occlusion_penalty,
            "continuity_band": cfg.solver.continuity_band,
            "layer_preference": cfg.solver.layer_preference,
        },
        "label_counts": result.label_counts,
        "line_status": status_summary,
        "outputs": {"disparity": "disparity_xd.pfm", "labels": "labels.pgm"},
    }
    if scene.gt_left is not None:
        left_view, _ = result.view_maps()
        out["metrics"] = eval_metrics(left_view, scene.gt_left)
    write_json(cfg.out_dir / "solve_report.json", out)
    return out


def cmd_bias(cfg: RunConfig) -> dict:
    """Per-eye depth-bias distributions from GT + calibration."""
    scene = _load_scene_checked(cfg)
    if scene.gt_left is None:
        raise FileNotFoundError("bias requires disp0.pfm")
    out = compute_bias_report(scene.gt_left, scene.rig, scene_name=scene.name)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    write_json(cfg.out_dir / "bias.json", out)
    return out


def cmd_eval(pred_path: Path, gt_path: Path, out_path: Optional[Path] = None) -> dict:
    pred = read_pfm_file(pred_path, view=View.LEFT)
    gt = read_pfm_file(gt_path, view=View.LEFT)
    out = {"schema_version": 1, "pred": str(pred_path), "gt": str(gt_path)}
    out.update(eval_metrics(pred, gt))
    if out_path is not None:
        write_json(out_path, out)
    return out


def cmd_gen(kind: str, out_dir: Path, **spec_kw) -> Path:
    spec = SceneSpec(kind=SceneKind(kind), **spec_kw)
    scene = generate(spec)
    return write_scene(scene, out_dir)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON file preloading any flag")
    p.add_argument("--scene", type=Path, help="scene directory (Middlebury layout)")
    p.add_argument("--out-dir", type=Path, default=Path("out"))
    p.add_argument("--descriptor", choices=["census", "zero_mean_patch"],
                   default="census")
    p.add_argument("--window", type=int, default=7)
    p.add_argument("--d-max", type=int, default=None)
    p.add_argument("--lines", type=str, default=None,
                   help="comma-separated epipolar lines, or 'all'")
    p.add_argument("--lrc-tol", type=float, default=1.0)
    p.add_argument("--jump-threshold", type=float, default=2.0)
    p.add_argument("--pixel-tol", type=float, default=1.0)
    p.add_argument("--opaque-tol", type=float, default=1.0)
    p.add_argument("--budget-opaque", type=int, default=0)
    p.add_argument("--budget-davinci", type=int, default=0)
    p.add_argument("--kappa", type=float, default=0.3)
    p.add_argument("--band", type=int, default=1)
    p.add_argument("--policy", choices=["far", "near"], default="far")
    p.add_argument("--workers", type=int, default=None)


_PATH_ATTRS = ("scene", "out_dir")


def _config_from_args(args: argparse.Namespace, height_hint: Optional[int] = None
                      ) -> RunConfig:
    # config file fills any flag still at its default; explicit flags win
    if args.config:
        loaded = json.loads(Path(args.config).read_text())
        for key, value in loaded.items():
            attr = key.replace("-", "_")
            if not hasattr(args, attr) or attr == "config":
                continue
            if getattr(args, attr) == _DEFAULTS.get(attr):
                setattr(args, attr, Path(value) if attr in _PATH_ATTRS else value)
    lines = None
    if args.lines and args.lines != "all":
        lines = [int(v) for v in args.lines.split(",") if v.strip()]
    elif args.lines == "all":
        lines = list(range(height_hint)) if height_hint else None
    return RunConfig(
        scene=args.scene,
        out_dir=args.out_dir,
        descriptor=DescriptorKind(args.descriptor),
        window=args.window,
        lines=lines,
        d_max=args.d_max,
        solver=SolverParams(occlusion_penalty=args.kappa, continuity_band=args.band,
                            layer_preference=args.policy),
        lrc_tol=args.lrc_tol,
        jump_threshold=args.jump_threshold,
        pixel_tol=args.pixel_tol,
        opaque_tol=args.opaque_tol,
        budget_opaque=args.budget_opaque,
        budget_davinci=args.budget_davinci,
        workers=args.workers,
    )


_DEFAULTS = {
    "scene": None, "out_dir": Path("out"), "descriptor": "census", "window": 7,
    "d_max": None, "lines": None, "lrc_tol": 1.0, "jump_threshold": 2.0,
    "pixel_tol": 1.0, "opaque_tol": 1.0, "budget_opaque": 0, "budget_davinci": 0,
    "kappa": 0.3, "band": 1, "policy": "far", "workers": None,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cyclostereo",
        description="Cyclopean stereo geometry toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name, doc in (
        ("slice", "render LR-space cost heatmaps for selected lines"),
        ("validate", "check Opaque-GC / Da Vinci-GC on scene GT"),
        ("solve", "run the constraint-respecting scanline solver"),
        ("bias", "per-eye depth bias report from GT + calibration"),
    ):
        p = sub.add_parser(name, help=doc)
        _add_common(p)

    p = sub.add_parser("eval", help="compare a predicted PFM against a GT PFM")
    p.add_argument("--pred", type=Path, required=True)
    p.add_argument("--gt", type=Path, required=True)
    p.add_argument("--out", type=Path, default=None)

    p = sub.add_parser("gen", help="generate a synthetic oracle scene")
    p.add_argument("--kind", required=True,
                   choices=[k.value for k in SceneKind])
    p.add_argument("--out-dir", type=Path, required=True)
    p.add_argument("--width", type=int, default=160)
    p.add_argument("--height", type=int, default=24)
    p.add_argument("--bg-d", type=int, default=4)
    p.add_argument("--fg-d", type=int, default=10)
    p.add_argument("--edge", type=int, default=80)
    p.add_argument("--pole-pos", type=int, default=80)
    p.add_argument("--pole-width", type=int, default=3)
    p.add_argument("--period", type=int, default=8)
    p.add_argument("--band", type=int, nargs=2, default=(20, 140))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ndisp", type=int, default=None)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "gen":
            path = cmd_gen(args.kind, args.out_dir, width=args.width,
                           height=args.height, bg_d=args.bg_d, fg_d=args.fg_d,
                           edge=args.edge, pole_pos=args.pole_pos,
                           pole_width=args.pole_width, period=args.period,
                           band=tuple(args.band), seed=args.seed, ndisp=args.ndisp)
            print(path)
            return 0
        if args.command == "eval":
            out = cmd_eval(args.pred, args.gt, args.out)
            print(dumps_json(out))
            return 0

        height_hint = None
        if args.lines == "all" and args.scene:
            height_hint = load_scene(args.scene).height
        cfg = _config_from_args(args, height_hint)
        if args.command == "slice":
            out = cmd_slice(cfg)
            print(dumps_json({"lines": [ln["e"] for ln in out["lines"]]}))
            return 0
        if args.command == "validate":
            out, code = cmd_validate(cfg)
            print(dumps_json(out["counts"]))
            return code
        if args.command == "solve":
            out = cmd_solve(cfg)
            print(dumps_json(out.get("metrics", out["label_counts"])))
            return 0
        if args.command == "bias":
            out = cmd_bias(cfg)
            print(dumps_json(out["identity_residual"]))
            return 0
        parser.error(f"unknown command {args.command}")
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
