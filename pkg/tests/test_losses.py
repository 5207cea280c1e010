import math

import numpy as np
import pytest

from clicklab import losses
from clicklab.core import ParameterError, rng_stream
from oracles import central_diff

ONE = np.array([[1]], dtype=np.uint8)


def random_pair(rng, h=6, w=6):
    pred = rng.uniform(0.01, 0.99, size=(h, w))
    gt = (rng.random((h, w)) < 0.5).astype(np.uint8)
    gt.flat[0] = 1
    gt.flat[-1] = 0
    return pred, gt


# ---------------------------------------------------------------------------
# bce
# ---------------------------------------------------------------------------

def test_bce_perfect_prediction_is_zero():
    out = losses.bce(np.ones((3, 3)), np.ones((3, 3), dtype=np.uint8))
    assert out.value == 0.0
    np.testing.assert_array_equal(out.grad_wrt_prob, np.full((3, 3), -1.0))  # -1/pt at pt=1


def test_bce_half_pixel_is_log_two():
    assert losses.bce(np.array([[0.5]]), ONE).value == pytest.approx(math.log(2), abs=1e-12)


def test_bce_gradient_matches_central_difference():
    # single pixel, y=1, p=0.5: closed form -1/p = -2
    fd = central_diff(lambda p: losses.bce(p, ONE).value, np.array([[0.5]]))
    analytic = losses.bce(np.array([[0.5]]), ONE).grad_wrt_prob
    assert fd[0, 0] == pytest.approx(-2.0, rel=1e-8)
    assert analytic[0, 0] == pytest.approx(fd[0, 0], rel=1e-8)


# ---------------------------------------------------------------------------
# focal / poly
# ---------------------------------------------------------------------------

def test_focal_gamma_zero_is_bce_exactly():
    rng = rng_stream(11, "test/focal0")
    pred, gt = random_pair(rng)
    f = losses.focal(pred, gt, 0.0)
    b = losses.bce(pred, gt)
    assert f.value == b.value
    np.testing.assert_array_equal(f.grad_wrt_prob, b.grad_wrt_prob)


def test_focal_worked_half_pixel():
    # (1-0.5)^2 * ln 2 = 0.25 * 0.693147... = 0.173287
    got = losses.focal(np.array([[0.5]]), ONE, 2.0).value
    assert got == pytest.approx(0.25 * math.log(2), abs=1e-12)


def test_focal_perfect_is_zero_value_and_grad():
    out = losses.focal(np.ones((2, 2)), np.ones((2, 2), dtype=np.uint8), 2.0)
    assert out.value == 0.0
    np.testing.assert_array_equal(out.grad_wrt_prob, np.zeros((2, 2)))


def test_focal_gamma_range_enforced():
    with pytest.raises(ParameterError):
        losses.focal(np.array([[0.5]]), ONE, 5.5)


def test_poly_alpha_zero_is_focal_exactly():
    rng = rng_stream(12, "test/poly0")
    pred, gt = random_pair(rng)
    p = losses.poly(pred, gt, 2.3, 0.0)
    f = losses.focal(pred, gt, 2.3)
    assert p.value == f.value
    np.testing.assert_array_equal(p.grad_wrt_prob, f.grad_wrt_prob)


def test_poly_worked_half_pixel():
    # focal part 0.25*ln2 plus alpha*(1-pt)^(gamma+1) = 1 * 0.5^3 = 0.125
    got = losses.poly(np.array([[0.5]]), ONE, 2.0, 1.0).value
    assert got == pytest.approx(0.25 * math.log(2) + 0.125, abs=1e-12)


def test_poly_perfect_is_zero():
    assert losses.poly(np.ones((2, 2)), np.ones((2, 2), dtype=np.uint8), 2.0, 1.0).value == 0.0


# ---------------------------------------------------------------------------
# nfl
# ---------------------------------------------------------------------------

def test_nfl_constant_pt_equals_bce():
    # (1-pt)^gamma is constant, so the normalizer cancels it exactly
    for pt in (0.3, 0.6, 0.9):
        pred = np.full((4, 5), pt)
        gt = np.ones((4, 5), dtype=np.uint8)
        got = losses.nfl(pred, gt, 2.0).value
        want = losses.bce(pred, gt).value
        assert got == pytest.approx(want, abs=1e-10)


def test_nfl_single_pixel_is_bce_any_gamma():
    pred = np.array([[0.37]])
    for gamma in (0.0, 1.0, 3.7, 5.0):
        assert losses.nfl(pred, ONE, gamma).value == pytest.approx(
            losses.bce(pred, ONE).value, abs=1e-12)


def test_nfl_degenerate_all_perfect():
    out = losses.nfl(np.ones((3, 3)), np.ones((3, 3), dtype=np.uint8), 2.0)
    assert out.value == 0.0
    np.testing.assert_array_equal(out.grad_wrt_prob, np.zeros((3, 3)))


# ---------------------------------------------------------------------------
# dice
# ---------------------------------------------------------------------------

def test_dice_exact_match_is_zero():
    gt = np.zeros((4, 4), dtype=np.uint8)
    gt[1:3, 1:3] = 1
    assert losses.dice(gt.astype(float), gt, smooth=1.0).value == 0.0


def _k_ones(k):
    gt = np.zeros((3, 3), dtype=np.uint8)
    gt.flat[:k] = 1
    return gt


def test_dice_empty_prediction_direct_substitution():
    # pred all 0, k foreground pixels: 1 - (0+1)/(k+1); k=3 gives 0.75
    for k in (1, 3, 7):
        got = losses.dice(np.zeros((3, 3)), _k_ones(k), smooth=1.0).value
        assert got == pytest.approx(1.0 - 1.0 / (k + 1), abs=1e-12)


def test_dice_both_empty_is_zero():
    assert losses.dice(np.zeros((2, 2)), np.zeros((2, 2), dtype=np.uint8), 1.0).value == 0.0


# ---------------------------------------------------------------------------
# aux losses
# ---------------------------------------------------------------------------

def test_wbce_beta_one_equals_bce():
    rng = rng_stream(13, "test/wbce")
    pred, gt = random_pair(rng)
    got = losses.aux_loss("wbce", pred, gt, beta=1.0)
    want = losses.bce(pred, gt)
    assert got.value == pytest.approx(want.value, rel=1e-12)
    np.testing.assert_allclose(got.grad_wrt_prob, want.grad_wrt_prob, rtol=1e-12)


def test_wbce_auto_beta_requires_foreground():
    with pytest.raises(ParameterError):
        losses.aux_loss("wbce", np.full((2, 2), 0.5), np.zeros((2, 2), dtype=np.uint8))


def test_wbce_auto_beta_is_neg_over_pos():
    gt = np.zeros((2, 2), dtype=np.uint8)
    gt[0, 0] = 1  # 3 negatives / 1 positive
    out = losses.aux_loss("wbce", np.full((2, 2), 0.5), gt)
    assert out.diagnostics["beta"] == pytest.approx(3.0)


def test_balanced_ce_half_beta_is_half_bce():
    rng = rng_stream(14, "test/bal")
    pred, gt = random_pair(rng)
    got = losses.aux_loss("balanced_ce", pred, gt, beta=0.5)
    want = losses.bce(pred, gt)
    assert got.value == pytest.approx(0.5 * want.value, rel=1e-12)


def test_soft_iou_exact_match_is_zero():
    gt = np.zeros((4, 4), dtype=np.uint8)
    gt[0:2, 0:2] = 1
    assert losses.aux_loss("soft_iou", gt.astype(float), gt).value == 0.0


def test_balanced_ce_requires_unit_interval_beta():
    with pytest.raises(ParameterError):
        losses.aux_loss("balanced_ce", np.full((3, 3), 0.5), _k_ones(2), beta=1.5)


# ---------------------------------------------------------------------------
# shared properties
# ---------------------------------------------------------------------------

ALL_LOSSES = [
    ("bce", {}),
    ("wbce", {"beta": 2.0}),
    ("balanced_ce", {"beta": 0.3}),
    ("soft_iou", {}),
    ("focal", {"gamma": 2.0}),
    ("nfl", {"gamma": 2.0}),
    ("poly", {"gamma": 2.0, "alpha": 1.0}),
    ("dice", {}),
    ("afl", {}),
]


@pytest.mark.parametrize("name,params", ALL_LOSSES)
@pytest.mark.parametrize("label", [0, 1])
def test_per_pixel_contribution_nonincreasing_in_pt(name, params, label):
    # the single-pixel loss traces the per-pixel contribution as a function
    # of pt; it must never increase as pt rises toward 1
    fn = losses.make_loss(name, **params)
    gt = np.array([[label]], dtype=np.uint8)
    pts = np.linspace(0.001, 1.0, 200)
    probs = pts if label == 1 else 1.0 - pts
    values = [fn(np.array([[p]]), gt).value for p in probs]
    diffs = np.diff(values)
    assert (diffs <= 1e-12).all()


def test_powlog_contribution_nonincreasing_for_any_coefficients():
    # the modulated cross-entropy kernel itself is monotone for every
    # (exponent, alpha, mu) combination the adaptive loss can produce
    pts = np.linspace(1e-6, 1.0, 400)
    for g in (0.0, 0.7, 2.0, 5.0, 6.0):
        for alpha in (0.0, 1.0, 3.0):
            for mu_val in (0.5, 1.0, 10.0):
                value_px, _ = losses.powlog_kernel(pts, g, alpha, mu_val)
                assert (np.diff(value_px) <= 1e-12).all()


@pytest.mark.parametrize("name,params", ALL_LOSSES)
def test_loss_value_finite_even_at_extremes(name, params):
    gt = np.zeros((3, 3), dtype=np.uint8)
    gt[0, :] = 1
    for fill in (0.0, 1.0):
        out = losses.make_loss(name, **params)(np.full((3, 3), fill), gt)
        assert np.isfinite(out.value)
        assert np.isfinite(out.grad_wrt_prob).all()


def test_mean_reduction_scales_by_pixel_count():
    rng = rng_stream(16, "test/mean")
    pred, gt = random_pair(rng)
    s = losses.focal(pred, gt, 2.0, reduction="sum")
    m = losses.focal(pred, gt, 2.0, reduction="mean")
    assert m.value == pytest.approx(s.value / pred.size, rel=1e-12)
    np.testing.assert_allclose(m.grad_wrt_prob, s.grad_wrt_prob / pred.size, rtol=1e-12)


def test_taylor_identity_fifty_terms():
    # sum_{k=1..50} (1-pt)^k / k reproduces -log(pt) on [0.6, 0.99]
    from clicklab.adaptive import neg_log_series

    pts = np.linspace(0.6, 0.99, 25)
    np.testing.assert_allclose(neg_log_series(pts, 50), -np.log(pts), atol=1e-8)


def test_make_loss_rejects_unknown_and_extras():
    with pytest.raises(ParameterError):
        losses.make_loss("nope")
    with pytest.raises(ParameterError):
        losses.make_loss("bce", gamma=2.0)
