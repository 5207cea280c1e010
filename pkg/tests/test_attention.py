import dataclasses

import numpy as np
import pytest

from clicklab import attention
from clicklab.clicksim import ClickRecord
from clicklab.core import ParameterError, rng_stream


def toy_params(n=4, d=8, seed=0):
    return attention.AttentionParams.initialize(n, d, seed)


def toy_scale(h, w, d, seed=0, clicks=()):
    rng = rng_stream(seed, "test/scale")
    from clicklab.clicksim import encode_clicks

    pos, neg = encode_clicks(list(clicks), h, w, radius=2)
    return attention.ScaleFeatures(rng.uniform(-1, 1, size=(h * w, d)), pos - neg, h, w)


# ---------------------------------------------------------------------------
# attention mask
# ---------------------------------------------------------------------------

def test_attn_mask_all_foreground_unmasked():
    row = attention.attn_mask_from_pred(np.full((3, 3), 0.8), 0.5)
    np.testing.assert_array_equal(row, np.zeros(9))


def test_attn_mask_all_background_resets():
    row = attention.attn_mask_from_pred(np.full((3, 3), 0.2), 0.5)
    np.testing.assert_array_equal(row, np.zeros(9))


def test_attn_mask_complement_pattern():
    pred = np.array([[0.9, 0.1], [0.1, 0.9]])
    row = attention.attn_mask_from_pred(pred, 0.5)
    assert row[0] == 0.0 and row[3] == 0.0
    assert np.isneginf(row[1]) and np.isneginf(row[2])


# ---------------------------------------------------------------------------
# click attention matrix
# ---------------------------------------------------------------------------

def test_psi_zero_click_map_is_constant_bias():
    params = toy_params()
    scale = toy_scale(4, 4, 8)
    q = rng_stream(1, "test/q").uniform(-1, 1, size=(4, 8))
    psi = attention.click_attention_matrix(scale, q, params, np.zeros((4, 16)))
    np.testing.assert_allclose(psi, params.psi_bias)


def test_psi_negative_queries_rectified_away():
    params = toy_params()
    clicks = [ClickRecord(1, 1, True, 1)]
    scale = toy_scale(4, 4, 8, clicks=clicks)
    q = -np.abs(rng_stream(2, "test/qneg").uniform(0.5, 1.0, size=(4, 8)))
    psi = attention.click_attention_matrix(scale, q, params, np.zeros((4, 16)))
    np.testing.assert_allclose(psi, params.psi_bias)


def test_psi_mask_positions_become_neg_inf():
    params = toy_params()
    scale = toy_scale(4, 4, 8, clicks=[ClickRecord(0, 0, True, 1)])
    q = np.abs(rng_stream(3, "test/qpos").uniform(0.5, 1.0, size=(4, 8)))
    mask = np.zeros((4, 16))
    mask[1, 3] = -np.inf
    psi = attention.click_attention_matrix(scale, q, params, mask)
    assert np.isneginf(psi[1, 3])
    assert np.isfinite(psi[0]).all()


def test_psi_unmasked_matches_masked_elsewhere():
    params = toy_params()
    scale = toy_scale(4, 4, 8, clicks=[ClickRecord(2, 2, True, 1)])
    q = np.abs(rng_stream(4, "test/qfree").uniform(0.1, 1.0, size=(4, 8)))
    free = attention.click_attention_matrix(scale, q, params, np.zeros((4, 16)))
    mask = np.zeros((4, 16))
    mask[2, 5] = -np.inf
    masked = attention.click_attention_matrix(scale, q, params, mask)
    keep = np.isfinite(masked)
    np.testing.assert_array_equal(masked[keep], free[keep])


# ---------------------------------------------------------------------------
# decoder block
# ---------------------------------------------------------------------------

def test_masked_cross_attention_reduces_to_plain_softmax():
    rng = rng_stream(5, "test/plain")
    x = rng.uniform(-1, 1, size=(3, 8))
    q = rng.uniform(-1, 1, size=(3, 8))
    k = rng.uniform(-1, 1, size=(12, 8))
    v = k.copy()
    got = attention.masked_cross_attention(x, np.zeros((3, 12)), q, k, v)
    scores = q @ k.T
    e = np.exp(scores - scores.max(axis=1, keepdims=True))
    want = (e / e.sum(axis=1, keepdims=True)) @ v + x
    np.testing.assert_allclose(got, want, atol=1e-12)


def test_camd_layer_identical_queries_identical_outputs():
    params = toy_params()
    scale = toy_scale(4, 4, 8, clicks=[ClickRecord(1, 2, True, 1)])
    x = np.tile(rng_stream(6, "test/same").uniform(-1, 1, size=(1, 8)), (4, 1))
    state = attention.AttentionState(x, np.zeros((4, 16)), np.zeros((4, 16)), 0)
    out = attention.camd_layer(state, scale, params)
    for row in out.x[1:]:
        np.testing.assert_array_equal(row, out.x[0])


def test_camd_layer_reset_row_equals_unmasked_row():
    # row 1's prediction is all background, so its mask row resets to
    # unmasked; its attention distribution must match the fully unmasked run
    # (rows are independent in the cross-attention softmax)
    params = toy_params()
    scale = toy_scale(4, 4, 8, clicks=[ClickRecord(1, 1, False, 1)])
    x = rng_stream(7, "test/reset").uniform(-1, 1, size=(4, 8))

    preds = [np.full((4, 4), 0.9), np.zeros((4, 4)), np.eye(4), np.full((4, 4), 0.6)]
    mask = attention.stack_attn_masks(preds, 0.5, 4, 4)
    np.testing.assert_array_equal(mask[1], np.zeros(16))

    free_attn: list = []
    free_state = attention.AttentionState(x, np.zeros((4, 16)), np.zeros((4, 16)), 0)
    attention.camd_layer(free_state, scale, params, collect=free_attn)
    masked_attn: list = []
    masked_state = attention.AttentionState(
        x, np.where(np.isneginf(mask), -np.inf, 0.0), mask, 0)
    attention.camd_layer(masked_state, scale, params, collect=masked_attn)
    np.testing.assert_array_equal(masked_attn[0]["attn"][1], free_attn[0]["attn"][1])


def test_camd_layer_rows_sum_to_one_with_masks():
    params = toy_params()
    scale = toy_scale(4, 4, 8, clicks=[ClickRecord(0, 3, True, 1)])
    x = rng_stream(8, "test/rows").uniform(-1, 1, size=(4, 8))
    mask = np.zeros((4, 16))
    mask[0, :8] = -np.inf
    mask[2, 1:] = -np.inf
    collected = []
    state = attention.AttentionState(x, np.where(np.isneginf(mask), -np.inf, 0.0), mask, 0)
    attention.camd_layer(state, scale, params, collect=collected)
    attn = collected[0]["attn"]
    np.testing.assert_allclose(attn.sum(axis=1), np.ones(4), atol=1e-9)
    assert attn[0, :8].max() == 0.0
    assert attn[2, 1:].max() == 0.0


# ---------------------------------------------------------------------------
# prediction heads
# ---------------------------------------------------------------------------

def test_predict_heads_zero_weights_give_uniform_outputs():
    params = toy_params()
    zeroed = dataclasses.replace(
        params,
        mask_head=[(np.zeros((8, 8)), np.zeros(8)) for _ in range(3)],
        click_head=np.zeros((8, 2)),
        click_bias=np.zeros(2),
    )
    embed = toy_scale(4, 4, 8)
    x = rng_stream(9, "test/heads").uniform(-1, 1, size=(4, 8))
    preds = attention.predict_heads(x, embed, zeroed)
    assert len(preds) == 4
    for p in preds:
        np.testing.assert_allclose(p.mask_probs, 0.5, atol=1e-15)
        np.testing.assert_allclose(p.click_class_probs, [0.5, 0.5], atol=1e-15)


def test_predict_heads_class_probs_sum_to_one():
    params = toy_params()
    embed = toy_scale(4, 4, 8)
    x = rng_stream(10, "test/heads2").uniform(-3, 3, size=(4, 8))
    for p in attention.predict_heads(x, embed, params):
        assert p.click_class_probs.sum() == pytest.approx(1.0, abs=1e-12)
        assert p.mask_probs.shape == (4, 4)


# ---------------------------------------------------------------------------
# full forward
# ---------------------------------------------------------------------------

def forward_once(seed, blocks=1, h=32, w=32, n=4, d=8, collect=None):
    params = attention.AttentionParams.initialize(n, d, seed)
    rng = rng_stream(seed, "test/forward")
    image = rng.random((h, w))
    clicks = [ClickRecord(h // 2, w // 2, True, 1)]
    scales, embed = attention.build_feature_stack(image, clicks, d, seed)
    return attention.camd_forward(scales, embed, params, blocks, collect=collect)


def test_forward_layer_count_and_shapes():
    collected = []
    preds = forward_once(seed=11, blocks=1, collect=collected)
    assert len(collected) == 3  # one block = one pass over the three scales
    assert len(preds) == 4
    assert preds[0].mask_probs.shape == (8, 8)  # quarter of a 32x32 image


def test_forward_bit_identical_rerun():
    a = forward_once(seed=12, blocks=2)
    b = forward_once(seed=12, blocks=2)
    for pa, pb in zip(a, b):
        np.testing.assert_array_equal(pa.mask_probs, pb.mask_probs)
        np.testing.assert_array_equal(pa.click_class_probs, pb.click_class_probs)


def test_forward_click_sensitivity():
    seed = 13
    params = attention.AttentionParams.initialize(4, 8, seed)
    image = rng_stream(seed, "test/forward").random((32, 32))
    scales_a, embed_a = attention.build_feature_stack(
        image, [ClickRecord(8, 8, True, 1)], 8, seed)
    scales_b, embed_b = attention.build_feature_stack(
        image, [ClickRecord(24, 24, True, 1)], 8, seed)
    a = attention.camd_forward(scales_a, embed_a, params, 1)
    b = attention.camd_forward(scales_b, embed_b, params, 1)
    assert any(np.abs(pa.mask_probs - pb.mask_probs).max() > 0 for pa, pb in zip(a, b))


def test_forward_no_nan_over_seeded_sweep():
    for seed in range(25):
        for p in forward_once(seed=seed, blocks=3):
            assert np.isfinite(p.mask_probs).all()
            assert np.isfinite(p.click_class_probs).all()


def test_forward_validates_inputs():
    params = toy_params()
    with pytest.raises(ParameterError):
        attention.camd_forward([], toy_scale(4, 4, 8), params, 1)
    scales, embed = attention.build_feature_stack(np.ones((32, 32)), [], 8, 0)
    with pytest.raises(ParameterError):
        attention.camd_forward(scales, embed, toy_params(), 0)
