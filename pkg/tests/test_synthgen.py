import numpy as np
import pytest

from clicklab import synthgen
from clicklab.core import GenerationError, ParameterError


def test_same_seed_identical_samples():
    spec = synthgen.SynthSpec(48, 48, 2, "blob", 1.0, False, seed=5)
    a = synthgen.generate(spec)
    b = synthgen.generate(spec)
    np.testing.assert_array_equal(a.feature_map, b.feature_map)
    for ma, mb in zip(a.gt_instances, b.gt_instances):
        np.testing.assert_array_equal(ma, mb)


def test_disk_without_noise_is_perfect_disk():
    spec = synthgen.SynthSpec(64, 64, 1, "disk", 0.0, False, seed=3)
    mask = synthgen.generate(spec).gt_instances[0]
    ys, xs = np.nonzero(mask)
    cy, cx = ys.mean(), xs.mean()
    r = np.hypot(ys - cy, xs - cx).max()
    rows, cols = np.mgrid[0:64, 0:64].astype(float)
    ideal = (np.hypot(rows - cy, cols - cx) <= r + 1e-9).astype(np.uint8)
    assert (mask == ideal).mean() > 0.99  # rasterization against the fitted circle


def test_masks_nonempty_and_in_bounds():
    for kind in synthgen.SHAPE_KINDS:
        spec = synthgen.SynthSpec(40, 56, 2, kind, 0.5, False, seed=9)
        sample = synthgen.generate(spec)
        assert len(sample.gt_instances) == 2
        for m in sample.gt_instances:
            assert m.sum() > 0
            assert m.shape == (40, 56)


def test_nested_strict_containment():
    spec = synthgen.SynthSpec(64, 64, 2, "disk", 0.0, True, seed=1)
    outer, inner = synthgen.generate(spec).gt_instances
    assert inner.sum() > 0
    assert (inner <= outer).all()
    assert inner.sum() < outer.sum()


def test_nesting_requires_two_instances():
    with pytest.raises(ParameterError):
        synthgen.SynthSpec(64, 64, 1, "disk", 0.0, True, seed=0).validate()


def test_infeasible_spec_raises_generation_error():
    # 20 instances cannot be packed disjointly at this radius range
    spec = synthgen.SynthSpec(16, 16, 20, "disk", 0.0, False, seed=0)
    with pytest.raises(GenerationError):
        synthgen.generate(spec)


def test_intensity_channel_is_indicator_without_noise():
    spec = synthgen.SynthSpec(32, 32, 1, "disk", 0.0, False, seed=2)
    sample = synthgen.generate(spec)
    np.testing.assert_array_equal(
        sample.feature_map[..., 3], sample.gt_instances[0].astype(float))


def test_feature_channels_in_unit_interval():
    spec = synthgen.SynthSpec(32, 32, 2, "blob", 2.0, False, seed=4)
    f = synthgen.generate(spec).feature_map
    assert f.shape == (32, 32, 4)
    assert f.min() >= 0.0 and f.max() <= 1.0


def test_spec_json_roundtrip():
    spec = synthgen.SynthSpec(48, 32, 2, "ellipse", 0.3, False, seed=77)
    assert synthgen.SynthSpec.from_json(spec.to_json()) == spec
    with pytest.raises(ParameterError):
        synthgen.SynthSpec.from_json({"bogus": 1})


# ---------------------------------------------------------------------------
# difficulty profile
# ---------------------------------------------------------------------------

def test_profile_perfect_prediction_top_bin():
    spec = synthgen.SynthSpec(32, 32, 1, "disk", 0.0, False, seed=6)
    sample = synthgen.generate(spec)
    prof = synthgen.difficulty_profile(sample, sample.gt_instances[0].astype(float))
    assert prof["foreground"][-1] == int(sample.gt_instances[0].sum())
    assert sum(prof["foreground"][:-1]) == 0
    assert prof["background"][-1] == int((1 - sample.gt_instances[0]).sum())


def test_profile_uniform_half_lands_in_middle_bin():
    spec = synthgen.SynthSpec(32, 32, 1, "disk", 0.0, False, seed=6)
    sample = synthgen.generate(spec)
    prof = synthgen.difficulty_profile(sample, np.full((32, 32), 0.5))
    # 0.5 falls in bin [0.5, 0.55), index 10 of 20
    assert prof["foreground"][10] == int(sample.gt_instances[0].sum())
    assert prof["background"][10] == int((1 - sample.gt_instances[0]).sum())


def test_profile_bins_sum_to_pixel_count():
    spec = synthgen.SynthSpec(24, 24, 2, "blob", 1.0, False, seed=8)
    sample = synthgen.generate(spec)
    pred = np.linspace(0.0, 1.0, 24 * 24).reshape(24, 24)
    prof = synthgen.difficulty_profile(sample, pred)
    assert sum(prof["foreground"]) + sum(prof["background"]) == 24 * 24
