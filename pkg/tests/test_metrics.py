"""Evaluation metrics, checked against a plain-loop recount oracle."""

import numpy as np
import pytest

from cyclostereo.metrics import eval_metrics
from cyclostereo.middlebury import DisparityMap, View


def dmap(vals, view=View.LEFT):
    return DisparityMap(view, np.asarray(vals, dtype=np.float32))


def recount(pred, gt, tau):
    """Independent per-pixel loop: bad fraction over finite-GT pixels."""
    bad = n = 0
    for i in range(gt.shape[0]):
        for j in range(gt.shape[1]):
            if not np.isfinite(gt[i, j]):
                continue
            n += 1
            if not np.isfinite(pred[i, j]) or abs(pred[i, j] - gt[i, j]) > tau:
                bad += 1
    return bad / n if n else 0.0


class TestEvalMetrics:
    def test_perfect_prediction(self):
        rng = np.random.default_rng(0)
        vals = (rng.random((10, 12)) * 30).astype(np.float32)
        vals[rng.random((10, 12)) < 0.2] = np.inf
        gt = dmap(vals)
        m = eval_metrics(dmap(vals), gt)
        for tau in (0.5, 1, 2, 4):
            assert m[f"bad_{tau:g}"] == 0.0
        assert m["coverage"] == pytest.approx(np.isfinite(vals).mean())
        assert m["mean_abs_err"] == 0.0 and m["rms_err"] == 0.0

    def test_constant_offset(self):
        gt = dmap(np.full((6, 6), 10.0))
        pred = dmap(np.full((6, 6), 13.0))
        m = eval_metrics(pred, gt)
        assert m["bad_2"] == 1.0 and m["bad_4"] == 0.0
        assert m["mean_abs_err"] == pytest.approx(3.0)
        assert m["rms_err"] == pytest.approx(3.0)

    def test_unknown_prediction_counts_bad(self):
        gt = dmap([[5.0, 5.0]])
        pred = dmap([[5.0, np.inf]])
        m = eval_metrics(pred, gt)
        assert m["bad_0.5"] == 0.5
        assert m["density"] == 0.5
        assert m["mean_abs_err"] == 0.0  # over both-finite pixels only

    def test_unknown_gt_ignored(self):
        gt = dmap([[np.inf, 7.0]])
        pred = dmap([[123.0, 7.0]])
        m = eval_metrics(pred, gt)
        assert m["bad_0.5"] == 0.0 and m["coverage"] == 0.5

    def test_random_crops_match_recount_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            gt_vals = (rng.random((16, 16)) * 40).astype(np.float32)
            gt_vals[rng.random((16, 16)) < 0.25] = np.inf
            pred_vals = gt_vals + rng.normal(0, 2, (16, 16)).astype(np.float32)
            pred_vals[rng.random((16, 16)) < 0.1] = np.inf
            m = eval_metrics(dmap(pred_vals), dmap(gt_vals))
            for tau in (0.5, 1, 2, 4):
                assert m[f"bad_{tau:g}"] == pytest.approx(
                    recount(pred_vals, gt_vals, tau))

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError, match="shape"):
            eval_metrics(dmap(np.zeros((2, 2))), dmap(np.zeros((3, 3))))

    def test_view_mismatch_rejected(self):
        with pytest.raises(ValueError, match="view"):
            eval_metrics(dmap(np.zeros((2, 2)), View.RIGHT),
                         dmap(np.zeros((2, 2)), View.LEFT))
