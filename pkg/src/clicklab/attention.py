"""Toy clicks-aware masked-attention decoder.

Deterministic, numpy-only machinery for testing masking semantics and
click-to-query information flow.  One block applies, in order:

1. clicks-aware masked cross-attention over a scale's pixel features:
   ``x <- softmax(psi + Q K^T) V + x`` where ``psi`` is the click-attention
   matrix and masked positions are -inf (exactly zero weight after softmax);
2. self-attention over the queries (same projections);
3. a two-layer feed-forward update.

``psi`` is built from the scale's click map: a 3x3 max pool, a bias-free
linear lift to the feature dimension, a product with the rectified queries,
and an elementwise affine map.  Attention masks come from binarizing each
query's current mask prediction; a fully masked row is reset to unmasked
before softmax, which keeps every row a valid distribution.

A forward pass cycles the blocks over three coarse-to-fine scales and reads
out per-query masks and click-class probabilities at the pixel-embedding
resolution.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage
from scipy.special import expit

from .clicksim import DEFAULT_CLICK_RADIUS, encode_clicks
from .core import ClickLabError, DimensionError, ParameterError, binarize, rng_stream
from .matching import InstancePrediction

_SCALE_FRACTIONS = (32, 16, 8)  # coarse-to-fine denominators; pixel embed at 1/4
_EMBED_FRACTION = 4


@dataclass
class ScaleFeatures:
    features: np.ndarray   # (h*w, d)
    click_map: np.ndarray  # (h, w), positive disks +1, negative -1
    h: int
    w: int

    def __post_init__(self):
        if self.features.shape[0] != self.h * self.w:
            raise DimensionError(
                f"features rows {self.features.shape[0]} != h*w = {self.h * self.w}")
        if self.click_map.shape != (self.h, self.w):
            raise DimensionError(
                f"click map shape {self.click_map.shape} != ({self.h}, {self.w})")


@dataclass
class AttentionParams:
    n_queries: int
    dim: int
    f_q: np.ndarray        # (d, d)
    f_k: np.ndarray        # (d, d)
    f_v: np.ndarray        # (d, d)
    omega_f: np.ndarray    # (d,) bias-free linear lift of the pooled click map
    psi_scale: float
    psi_bias: float
    mask_head: list        # three (W, b) layers, d -> d
    click_head: np.ndarray  # (d, 2)
    click_bias: np.ndarray  # (2,)
    ffn_w1: np.ndarray     # (d, 2d)
    ffn_b1: np.ndarray
    ffn_w2: np.ndarray     # (2d, d)
    ffn_b2: np.ndarray
    x0: np.ndarray         # (N, d) initial query features
    seed: int

    @classmethod
    def initialize(cls, n_queries: int = 10, dim: int = 16, seed: int = 0) -> "AttentionParams":
        """All weights seeded uniform in [-1/sqrt(d), 1/sqrt(d)]."""
        if n_queries < 1 or dim < 1:
            raise ParameterError("n_queries and dim must be >= 1")
        bound = 1.0 / np.sqrt(dim)

        def u(label, *shape):
            return rng_stream(seed, f"attention/params/{label}").uniform(-bound, bound, size=shape)

        return cls(
            n_queries=n_queries,
            dim=dim,
            f_q=u("f_q", dim, dim),
            f_k=u("f_k", dim, dim),
            f_v=u("f_v", dim, dim),
            omega_f=u("omega_f", dim),
            psi_scale=float(u("psi_scale")),
            psi_bias=float(u("psi_bias")),
            mask_head=[(u(f"mask_head_w{i}", dim, dim), u(f"mask_head_b{i}", dim))
                       for i in range(3)],
            click_head=u("click_head", dim, 2),
            click_bias=u("click_bias", 2),
            ffn_w1=u("ffn_w1", dim, 2 * dim),
            ffn_b1=u("ffn_b1", 2 * dim),
            ffn_w2=u("ffn_w2", 2 * dim, dim),
            ffn_b2=u("ffn_b2", dim),
            x0=u("x0", n_queries, dim),
            seed=seed,
        )


@dataclass
class AttentionState:
    x: np.ndarray           # (N, d)
    psi_matrix: np.ndarray  # (N, h*w); -inf exactly where attn_mask is -inf
    attn_mask: np.ndarray   # (N, h*w) over {0, -inf}
    layer_index: int = 0


# ---------------------------------------------------------------------------
# building blocks
# ---------------------------------------------------------------------------

def resize_nearest(arr: np.ndarray, h: int, w: int) -> np.ndarray:
    rows = (np.arange(h) * arr.shape[0] // h).astype(int)
    cols = (np.arange(w) * arr.shape[1] // w).astype(int)
    return arr[np.ix_(rows, cols)]


def attn_mask_from_pred(mask_pred, threshold: float = 0.5) -> np.ndarray:
    """Flat {0, -inf} row: 0 where the binarized prediction is foreground.

    An all-background prediction would mask everything, so that row is reset
    to all-0 (unmasked) to keep the softmax well defined.
    """
    fg = binarize(mask_pred, threshold).ravel()
    row = np.where(fg == 1, 0.0, -np.inf)
    if not np.isfinite(row).any():
        row = np.zeros_like(row)
    return row


def stack_attn_masks(mask_preds, threshold: float, h: int, w: int) -> np.ndarray:
    """Per-query mask rows, resized (nearest) to the target scale."""
    return np.stack([
        attn_mask_from_pred(resize_nearest(p, h, w), threshold) for p in mask_preds
    ])


def click_attention_matrix(scale: ScaleFeatures, queries: np.ndarray,
                           params: AttentionParams, attn_mask: np.ndarray) -> np.ndarray:
    """psi = affine( pooled-click lift  x  rectified queries ), then masked.

    A zero click map or fully negative queries give a constant pre-mask
    field (the affine image of zero); masked positions become -inf.
    """
    if queries.shape[1] != params.dim:
        raise DimensionError(f"queries dim {queries.shape[1]} != {params.dim}")
    if attn_mask.shape != (queries.shape[0], scale.h * scale.w):
        raise DimensionError(
            f"attn_mask shape {attn_mask.shape} != ({queries.shape[0]}, {scale.h * scale.w})")
    pooled = ndimage.maximum_filter(scale.click_map, size=3, mode="constant", cval=0.0)
    lifted = pooled.reshape(-1, 1) * params.omega_f.reshape(1, -1)  # (hw, d)
    raw = np.maximum(queries, 0.0) @ lifted.T                       # (N, hw)
    psi = params.psi_scale * raw + params.psi_bias
    return np.where(np.isneginf(attn_mask), -np.inf, psi)


def masked_softmax(scores: np.ndarray) -> np.ndarray:
    """Row softmax where -inf entries get exactly zero weight."""
    top = scores.max(axis=1, keepdims=True)
    if not np.isfinite(top).all():
        raise ClickLabError("internal: attention row with every position masked")
    weights = np.exp(scores - top)
    return weights / weights.sum(axis=1, keepdims=True)


def masked_cross_attention(x, psi, q, k, v) -> np.ndarray:
    """softmax(psi + Q K^T) V plus the residual input."""
    return masked_softmax(psi + q @ k.T) @ v + x


def camd_layer(state: AttentionState, scale: ScaleFeatures,
               params: AttentionParams, collect: list | None = None) -> AttentionState:
    """One decoder block: clicks-aware cross-attention, self-attention, FFN."""
    q = state.x @ params.f_q
    k = scale.features @ params.f_k
    v = scale.features @ params.f_v
    psi = click_attention_matrix(scale, q, params, state.attn_mask)

    attn = masked_softmax(psi + q @ k.T)
    if collect is not None:
        collect.append({"attn": attn, "mask": state.attn_mask, "layer": state.layer_index})
    x = attn @ v + state.x

    x = masked_softmax((x @ params.f_q) @ (x @ params.f_k).T) @ (x @ params.f_v) + x
    x = np.maximum(x @ params.ffn_w1 + params.ffn_b1, 0.0) @ params.ffn_w2 + params.ffn_b2 + x
    if not np.isfinite(x).all():
        raise ClickLabError("internal: non-finite query features after decoder block")
    return AttentionState(x, psi, state.attn_mask, state.layer_index + 1)


def predict_heads(x: np.ndarray, pixel_embed: ScaleFeatures,
                  params: AttentionParams) -> list[InstancePrediction]:
    """Per-query mask probabilities and click-class probabilities.

    Mask logits are the query embedding (through a 3-layer MLP) against the
    pixel embedding; zero weights give logistic(0) = 0.5 everywhere and a
    uniform class pair.
    """
    h = x
    for i, (w_i, b_i) in enumerate(params.mask_head):
        h = h @ w_i + b_i
        if i < len(params.mask_head) - 1:
            h = np.maximum(h, 0.0)
    logits = h @ pixel_embed.features.T  # (N, hw)
    probs = expit(logits)

    cls_logits = x @ params.click_head + params.click_bias
    cls_logits = cls_logits - cls_logits.max(axis=1, keepdims=True)
    e = np.exp(cls_logits)
    cls_probs = e / e.sum(axis=1, keepdims=True)

    return [
        InstancePrediction(probs[i].reshape(pixel_embed.h, pixel_embed.w), cls_probs[i])
        for i in range(x.shape[0])
    ]


def camd_forward(scales, pixel_embed: ScaleFeatures, params: AttentionParams,
                 blocks: int, collect: list | None = None) -> list[InstancePrediction]:
    """Cycle the decoder block over the scales ``blocks`` times.

    The attention mask for each layer is recomputed from the current mask
    predictions (resized to that scale); the very first mask comes from the
    initial query features before any decoding.
    """
    if blocks < 1:
        raise ParameterError("blocks must be >= 1")
    if len(scales) != 3:
        raise ParameterError(f"expected 3 scale feature sets, got {len(scales)}")
    x = params.x0.copy()
    preds = predict_heads(x, pixel_embed, params)
    for layer in range(3 * blocks):
        scale = scales[layer % 3]
        mask = stack_attn_masks([p.mask_probs for p in preds], 0.5, scale.h, scale.w)
        psi0 = np.where(np.isneginf(mask), -np.inf, 0.0)
        state = AttentionState(x, psi0, mask, layer)
        state = camd_layer(state, scale, params, collect)
        x = state.x
        preds = predict_heads(x, pixel_embed, params)
    return preds


# ---------------------------------------------------------------------------
# toy feature stack (stand-in for the multi-scale pixel decoder)
# ---------------------------------------------------------------------------

def build_feature_stack(image: np.ndarray, clicks, dim: int, seed: int,
                        radius: float = DEFAULT_CLICK_RADIUS):
    """Seeded random projections of the click-augmented image at 4 scales.

    Returns ``(scales, pixel_embed)`` where scales run coarse to fine at
    1/32, 1/16 and 1/8 of the image and the pixel embedding sits at 1/4.
    Per-pixel channels are (intensity, positive clicks, negative clicks,
    row fraction, col fraction), lifted to ``dim`` by one random matrix per
    scale; click disks shrink with the scale ratio.
    """
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2 or img.size == 0:
        raise DimensionError("image must be a nonempty 2-D array")
    full_h, full_w = img.shape

    def at_scale(denom, label):
        h = max(1, full_h // denom)
        w = max(1, full_w // denom)
        scaled_clicks = [
            replace(c, row=min(h - 1, c.row * h // full_h), col=min(w - 1, c.col * w // full_w))
            for c in clicks
        ]
        r = max(1.0, radius * h / full_h)
        pos, neg = encode_clicks(scaled_clicks, h, w, radius=r)
        small = resize_nearest(img, h, w)
        rows, cols = np.mgrid[0:h, 0:w].astype(np.float64)
        channels = np.stack(
            [small, pos, neg, rows / h, cols / w], axis=-1).reshape(-1, 5)
        proj = rng_stream(seed, f"attention/stack/{label}").uniform(
            -1.0 / np.sqrt(5), 1.0 / np.sqrt(5), size=(5, dim))
        return ScaleFeatures(channels @ proj, pos - neg, h, w)

    scales = [at_scale(d, f"scale{i}") for i, d in enumerate(_SCALE_FRACTIONS)]
    pixel_embed = at_scale(_EMBED_FRACTION, "embed")
    return scales, pixel_embed
