"""Disparity evaluation: bad-tau rates, average errors, coverage."""

from __future__ import annotations

import numpy as np

from .middlebury import DisparityMap

DEFAULT_THRESHOLDS = (0.5, 1.0, 2.0, 4.0)


def eval_metrics(pred: DisparityMap, gt: DisparityMap,
                 thresholds=DEFAULT_THRESHOLDS) -> dict:
    """Standard error rates over pixels with known GT.

    bad-tau is the fraction of finite-GT pixels whose |error| exceeds tau,
    counting unknown predictions as failures at every tau.  Mean and RMS
    are over pixels finite in both maps.  Unknown-GT pixels are ignored
    everywhere; coverage reports their complement.
    """
    if pred.values.shape != gt.values.shape:
        raise ValueError(
            f"shape mismatch: pred {pred.values.shape} vs gt {gt.values.shape}")
    if pred.view != gt.view:
        raise ValueError(f"view mismatch: pred {pred.view} vs gt {gt.view}")

    gt_known = gt.known_mask
    pred_known = pred.known_mask
    both = gt_known & pred_known
    n_gt = int(gt_known.sum())
    n_both = int(both.sum())

    out: dict = {
        "n_gt": n_gt,
        "n_evaluated": n_both,
        "coverage": float(gt_known.mean()) if gt_known.size else 0.0,
        "density": float(pred_known[gt_known].mean()) if n_gt else 0.0,
    }
    # unknown predictions produce inf error, failing every tau
    err = np.abs(pred.values.astype(np.float64) - gt.values.astype(np.float64))
    for tau in thresholds:
        key = f"bad_{tau:g}"
        out[key] = float((err[gt_known] > tau).mean()) if n_gt else 0.0
    finite_err = err[both]
    out["mean_abs_err"] = float(finite_err.mean()) if n_both else 0.0
    out["rms_err"] = float(np.sqrt((finite_err**2).mean())) if n_both else 0.0
    return out
