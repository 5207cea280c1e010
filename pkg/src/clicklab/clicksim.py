"""Automated click simulation and the NoC / mIoU@k metrics.

Protocol version 1, pinned so traces stay comparable across builds:

* error regions use 4-connectivity;
* the next click targets the largest error component (ties: larger first,
  then false-negative over false-positive, then smallest (row, col) of the
  component), landing on the interior pixel that maximizes Chebyshev
  distance to the component boundary (image borders count as boundary;
  ties: smallest (row, col));
* the first click is positive, placed the same way inside the ground truth;
* click disks are Euclidean with strict radius (radius 1 = single pixel),
  default radius 5 at full resolution;
* simulation stops at the highest threshold or after 20 clicks; a threshold
  never reached scores 20 and is flagged failed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .core import (
    ParameterError,
    PerfectPredictionError,
    as_binary_mask,
    binarize,
    check_same_shape,
    iou,
    rng_stream,
)

PROTOCOL_VERSION = "1"
DEFAULT_MAX_CLICKS = 20
DEFAULT_THRESHOLDS = (0.85, 0.90)
DEFAULT_CLICK_RADIUS = 5.0

_FOUR_CONNECTED = ndimage.generate_binary_structure(2, 1)


@dataclass(frozen=True)
class ClickRecord:
    row: int
    col: int
    positive: bool
    index: int  # 1-based ordinal within the session

    def as_dict(self) -> dict:
        return {"row": self.row, "col": self.col, "positive": self.positive, "index": self.index}


@dataclass
class SimTrace:
    clicks: list
    ious: list
    noc85: int
    noc90: int
    failed85: bool
    failed90: bool
    sample_id: str = ""

    def as_dict(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "clicks": [c.as_dict() for c in self.clicks],
            "ious": [float(v) for v in self.ious],
            "noc85": self.noc85,
            "noc90": self.noc90,
            "failed85": self.failed85,
            "failed90": self.failed90,
        }


# ---------------------------------------------------------------------------
# click placement
# ---------------------------------------------------------------------------

def interior_point(mask: np.ndarray) -> tuple[int, int]:
    """Pixel of ``mask`` maximizing Chebyshev distance to the region boundary.

    The array edge counts as boundary.  Among equidistant pixels the smallest
    (row, col) wins.
    """
    m = as_binary_mask(mask)
    if not m.any():
        raise ParameterError("interior_point needs a nonempty mask")
    padded = np.pad(m, 1)
    dist = ndimage.distance_transform_cdt(padded, metric="chessboard")[1:-1, 1:-1]
    best = dist.max()
    where = np.argwhere(dist == best)  # row-major, so [0] is the smallest (row, col)
    return int(where[0][0]), int(where[0][1])


def first_click(gt) -> ClickRecord:
    r, c = interior_point(gt)
    return ClickRecord(r, c, positive=True, index=1)


def next_click(pred, gt, prior=()) -> ClickRecord:
    """Click correcting the largest error component of the prediction.

    False-negative components receive a positive click, false-positive ones
    a negative click.  Placement depends only on the current error map; the
    prior list just supplies the next ordinal.
    """
    p = as_binary_mask(pred)
    y = as_binary_mask(gt)
    check_same_shape(p, y)
    fn = (y == 1) & (p == 0)
    fp = (p == 1) & (y == 0)
    if not fn.any() and not fp.any():
        raise PerfectPredictionError("prediction equals ground truth; no click needed")

    candidates = []
    for polarity_rank, err in ((0, fn), (1, fp)):
        labels, count = ndimage.label(err, structure=_FOUR_CONNECTED)
        for lbl in range(1, count + 1):
            comp = labels == lbl
            size = int(comp.sum())
            anchor = tuple(np.argwhere(comp)[0])
            candidates.append((-size, polarity_rank, anchor, comp))
    candidates.sort(key=lambda t: (t[0], t[1], t[2]))
    _, polarity_rank, _, comp = candidates[0]
    r, c = interior_point(comp.astype(np.uint8))
    return ClickRecord(r, c, positive=(polarity_rank == 0), index=len(prior) + 1)


def encode_clicks(clicks, h: int, w: int, radius: float = DEFAULT_CLICK_RADIUS):
    """Binary disk maps (positive, negative); strict Euclidean radius."""
    if radius < 1:
        raise ParameterError(f"radius must be >= 1, got {radius}")
    pos = np.zeros((h, w), dtype=np.float64)
    neg = np.zeros((h, w), dtype=np.float64)
    if not clicks:
        return pos, neg
    rows, cols = np.mgrid[0:h, 0:w].astype(np.float64)
    for click in clicks:
        if not (0 <= click.row < h and 0 <= click.col < w):
            raise ParameterError(f"click ({click.row}, {click.col}) outside {h}x{w} image")
        disk = np.hypot(rows - click.row, cols - click.col) < radius
        if click.positive:
            pos[disk] = 1.0
        else:
            neg[disk] = 1.0
    return pos, neg


# ---------------------------------------------------------------------------
# predictors
# ---------------------------------------------------------------------------

class OraclePredictor:
    """Returns the ground truth it was built with, whatever the clicks."""

    def __init__(self, gt):
        self.gt = as_binary_mask(gt)

    def predict(self, features, clicks):
        return self.gt.astype(np.float64)


class ConstantPredictor:
    """Never improves: a flat probability map (default all background)."""

    def __init__(self, shape, value: float = 0.0):
        self.shape = tuple(shape)
        self.value = float(value)

    def predict(self, features, clicks):
        return np.full(self.shape, self.value, dtype=np.float64)


class NoisyOraclePredictor:
    """Ground truth with a seeded fraction of pixels flipped.

    Flips are re-drawn per click count and never land inside a click disk,
    so accumulated clicks pin down their neighborhoods.
    """

    def __init__(self, gt, error_rate: float, seed: int, radius: float = DEFAULT_CLICK_RADIUS):
        if not (0.0 <= error_rate <= 1.0):
            raise ParameterError(f"error_rate must be in [0, 1], got {error_rate}")
        self.gt = as_binary_mask(gt)
        self.error_rate = float(error_rate)
        self.seed = int(seed)
        self.radius = radius

    def predict(self, features, clicks):
        rng = rng_stream(self.seed, f"clicksim/noisy/{len(clicks)}")
        flips = rng.random(self.gt.shape) < self.error_rate
        pos, neg = encode_clicks(clicks, *self.gt.shape, radius=self.radius)
        flips &= (pos + neg) == 0.0
        return np.where(flips, 1.0 - self.gt, self.gt).astype(np.float64)


class TrainedPredictor:
    """Wraps anything with ``predict_probs(stacked_channels)``; clicks are
    appended to the feature stack as a positive and a negative disk map."""

    def __init__(self, model, radius: float = DEFAULT_CLICK_RADIUS):
        self.model = model
        self.radius = radius

    def predict(self, features, clicks):
        h, w = features.shape[:2]
        pos, neg = encode_clicks(clicks, h, w, radius=self.radius)
        stacked = np.concatenate([features, pos[..., None], neg[..., None]], axis=-1)
        return self.model.predict_probs(stacked)


# ---------------------------------------------------------------------------
# simulation loop and metrics
# ---------------------------------------------------------------------------

def run_noc(predictor, features, gt, thresholds=DEFAULT_THRESHOLDS,
            max_clicks: int = DEFAULT_MAX_CLICKS, sample_id: str = "") -> SimTrace:
    """Click-predict-score loop; stops at the top threshold or the click cap."""
    y = as_binary_mask(gt)
    if not y.any():
        raise ParameterError("ground truth must contain foreground")
    lo, hi = sorted(float(t) for t in thresholds)
    if not (0.0 < lo <= hi <= 1.0):
        raise ParameterError(f"thresholds must lie in (0, 1], got {thresholds}")
    if max_clicks < 1:
        raise ParameterError("max_clicks must be >= 1")

    clicks = [first_click(y)]
    ious: list[float] = []
    for step in range(1, max_clicks + 1):
        prob = predictor.predict(features, clicks)
        mask = binarize(prob, 0.5)
        check_same_shape(mask, y)
        score = iou(mask, y)
        if not np.isfinite(score):
            raise ParameterError(f"non-finite IoU from predictor at click {step}")
        ious.append(score)
        if score >= hi:
            break
        if step < max_clicks:
            clicks.append(next_click(mask, y, prior=clicks))

    noc_lo, failed_lo = _noc_at(ious, lo, max_clicks)
    noc_hi, failed_hi = _noc_at(ious, hi, max_clicks)
    return SimTrace(clicks, ious, noc_lo, noc_hi, failed_lo, failed_hi, sample_id)


def _noc_at(ious, threshold, max_clicks):
    for idx, v in enumerate(ious, start=1):
        if v >= threshold:
            return idx, False
    return max_clicks, True


def miou_at_k(traces, k: int) -> float:
    """Mean IoU after k clicks; traces that stopped early hold their final IoU."""
    if not traces:
        raise ParameterError("miou_at_k needs at least one trace")
    if not (1 <= k <= DEFAULT_MAX_CLICKS):
        raise ParameterError(f"k must be in [1, {DEFAULT_MAX_CLICKS}], got {k}")
    return float(np.mean([t.ious[min(k, len(t.ious)) - 1] for t in traces]))


def aggregate(traces, max_clicks: int = DEFAULT_MAX_CLICKS) -> dict:
    """NoC means (failures count as the cap) and the mIoU@k table."""
    if not traces:
        raise ParameterError("aggregate needs at least one trace")
    return {
        "samples": len(traces),
        "mean_noc85": float(np.mean([t.noc85 for t in traces])),
        "mean_noc90": float(np.mean([t.noc90 for t in traces])),
        "failed85": sum(t.failed85 for t in traces),
        "failed90": sum(t.failed90 for t in traces),
        "miou_at_k": {str(k): miou_at_k(traces, k)
                      for k in range(1, min(max_clicks, DEFAULT_MAX_CLICKS) + 1)},
    }
