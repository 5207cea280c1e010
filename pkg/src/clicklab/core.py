"""Dense pixel-field primitives shared by every other module.

A mask or probability map is a plain 2-D float64/int ndarray; the validators
here are the single place where shape and range contracts are enforced.
All functions are pure and safe to call concurrently.
"""

from __future__ import annotations

import hashlib

import numpy as np

DEFAULT_EPS_CLIP = 1e-7


class ClickLabError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(ClickLabError):
    """Field shapes are inconsistent or a field is empty."""


class ParameterError(ClickLabError):
    """A scalar parameter or input value is outside its allowed range."""


class DomainError(ClickLabError):
    """An input lies outside the mathematical domain of the operation."""


class GenerationError(ClickLabError):
    """Synthetic-sample construction failed after bounded retries."""


class TrainingError(ClickLabError):
    """Training diverged (non-finite loss)."""


class PerfectPredictionError(ClickLabError):
    """Signals that prediction equals ground truth: nothing to correct."""


# ---------------------------------------------------------------------------
# field validation
# ---------------------------------------------------------------------------

def as_binary_mask(mask) -> np.ndarray:
    """Validate and return a 2-D {0,1} integer mask."""
    arr = np.asarray(mask)
    if arr.ndim != 2 or arr.size == 0:
        raise DimensionError(f"binary mask must be a nonempty 2-D field, got shape {arr.shape}")
    uniq = np.unique(arr)
    if not np.isin(uniq, (0, 1)).all():
        raise ParameterError(f"binary mask may contain only 0 and 1, found values {uniq[:8]}")
    return arr.astype(np.uint8, copy=False)


def as_prob_map(prob) -> np.ndarray:
    """Validate and return a 2-D float64 probability field in [0, 1]."""
    arr = np.asarray(prob, dtype=np.float64)
    if arr.ndim != 2 or arr.size == 0:
        raise DimensionError(f"probability map must be a nonempty 2-D field, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ParameterError("probability map contains non-finite values")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ParameterError(
            f"probabilities must lie in [0, 1], found range [{arr.min()}, {arr.max()}]")
    return arr


def check_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"field shapes differ: {a.shape} vs {b.shape}")


def check_eps_clip(eps_clip: float) -> float:
    if not (0.0 < eps_clip <= 1e-3):
        raise ParameterError(f"eps_clip must be in (0, 1e-3], got {eps_clip}")
    return float(eps_clip)


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def pt_map(pred, gt, eps_clip: float = DEFAULT_EPS_CLIP) -> np.ndarray:
    """Per-pixel true-class confidence: p where gt=1, 1-p where gt=0.

    The result is clamped from below at ``eps_clip`` so that log(pt) stays
    finite.  Only the lower end is clamped; pt = 1 is benign everywhere.
    """
    p = as_prob_map(pred)
    y = as_binary_mask(gt)
    check_same_shape(p, y)
    check_eps_clip(eps_clip)
    pt = np.where(y == 1, p, 1.0 - p)
    return np.maximum(pt, eps_clip)


def iou(pred_mask, gt) -> float:
    """Intersection over union of two binary masks; 1.0 when both are empty."""
    a = as_binary_mask(pred_mask)
    b = as_binary_mask(gt)
    check_same_shape(a, b)
    inter = int(np.count_nonzero(a & b))
    union = int(np.count_nonzero(a | b))
    if union == 0:
        return 1.0
    return inter / union


def binarize(pred, threshold: float = 0.5) -> np.ndarray:
    """Threshold a probability map; the comparison is inclusive (p >= t -> 1)."""
    if not (0.0 < threshold < 1.0):
        raise ParameterError(f"threshold must be in (0, 1), got {threshold}")
    p = as_prob_map(pred)
    return (p >= threshold).astype(np.uint8)


# ---------------------------------------------------------------------------
# deterministic randomness
# ---------------------------------------------------------------------------
#
# Stream-split rule: every consumer derives its generator from a 64-bit seed
# plus a string label ("module/purpose").  The label is hashed with SHA-256
# into the second Philox key word, so distinct labels give independent
# counter-based streams and the same (seed, label) pair is bit-reproducible.

def rng_stream(seed: int, label: str) -> np.random.Generator:
    """Counter-based generator for the given seed and stream label."""
    if not (0 <= int(seed) < 2 ** 64):
        raise ParameterError(f"seed must be an unsigned 64-bit integer, got {seed}")
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    label_word = int.from_bytes(digest[:8], "little")
    return np.random.Generator(np.random.Philox(key=np.array([seed, label_word], dtype=np.uint64)))
