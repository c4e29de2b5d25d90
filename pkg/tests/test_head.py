import numpy as np
import pytest

from hit import tensor as T
from hit.backbone import ModelConfig
from hit.errors import DimensionError
from hit.head import BoxNorm, CornerHead, corner_heatmaps, head_forward, reweight, soft_argmax
from hit.model import init_state

from conftest import rand

CFG = ModelConfig.tiny()


def _head(seed=0, use_g=True, zero=False):
    state = init_state(CornerHead.param_shapes(CFG, use_g), seed)
    if zero:
        state = {k: np.zeros_like(v) for k, v in state.items()}
    return CornerHead(CFG, state, use_g)


def _onehot(i, j):
    hm = np.zeros((16, 16), np.float32)
    hm[i, j] = 1
    return hm


def test_uniform_scores_double_everything(rng):
    os = rand(rng, 16, 16, 128)
    zero_proj = (np.zeros((384, 128), np.float32), np.zeros(128, np.float32))
    np.testing.assert_array_equal(reweight(rand(rng, 1, 384), os, zero_proj), 2 * os)


def test_saturated_score_boosts_one_position():
    os = np.ones((16, 16, 4), np.float32)
    os[3, 5] = 40.0
    proj = (np.zeros((4, 4), np.float32), np.full(4, 10.0, np.float32))
    out = reweight(np.zeros((1, 4), np.float32), os, proj)
    ratio = out / os
    assert ratio[3, 5, 0] == pytest.approx(257.0, rel=1e-4)
    others = np.delete(ratio.reshape(256, 4), 3 * 16 + 5, axis=0)
    np.testing.assert_allclose(others, 1.0, atol=1e-4)


def test_reweight_shape_mismatch(rng):
    with pytest.raises(DimensionError):
        reweight(rand(rng, 1, 384), rand(rng, 16, 16, 64), (rand(rng, 384, 128), rand(rng, 128)))


@pytest.mark.parametrize("hm, expected", [
    (_onehot(0, 0), (0.03125, 0.03125)),
    (_onehot(15, 15), (0.96875, 0.96875)),
    (np.full((16, 16), 1 / 256, np.float32), (0.5, 0.5)),
])
def test_soft_argmax_examples(hm, expected):
    assert soft_argmax(hm) == pytest.approx(expected, abs=1e-7)


def test_soft_argmax_axes():
    # row index is y, column index is x
    assert soft_argmax(_onehot(2, 9)) == pytest.approx(((9 + 0.5) / 16, (2 + 0.5) / 16))


def test_soft_argmax_rejects_unnormalized():
    with pytest.raises(ValueError):
        soft_argmax(np.ones((16, 16), np.float32))


def test_zero_weight_head_uniform_maps_and_point_box(rng):
    head = _head(zero=True)
    tl, br = corner_heatmaps(head, rand(rng, 16, 16, 128))
    np.testing.assert_allclose(tl, 1 / 256, atol=1e-9)
    np.testing.assert_allclose(br, 1 / 256, atol=1e-9)
    assert head_forward(head, rand(rng, 1, 384), rand(rng, 16, 16, 128)) == pytest.approx(BoxNorm(0.5, 0.5, 0.5, 0.5))


@pytest.mark.parametrize("seed", range(5))
def test_random_heads_produce_normalized_maps_and_valid_boxes(seed):
    rng = np.random.default_rng(seed)
    head = _head(seed)
    os = rand(rng, 16, 16, 128, scale=3.0)
    feat = reweight(rand(rng, 1, 384), os, head.gproj)
    for hm in corner_heatmaps(head, feat):
        assert np.isfinite(hm).all()
        assert abs(float(hm.sum(dtype=np.float64)) - 1) <= 1e-6
    box = head_forward(head, rand(rng, 1, 384), os)
    assert box.ordered and box.in_range


def test_swapped_corners_are_reordered(monkeypatch):
    head = _head(use_g=False)
    monkeypatch.setattr("hit.head.corner_heatmaps", lambda h, f: (_onehot(15, 15), _onehot(0, 0)))
    box = head_forward(head, None, np.zeros((16, 16, 128), np.float32))
    assert box == pytest.approx(BoxNorm(0.03125, 0.03125, 0.96875, 0.96875))


def test_zero_global_projection_equals_doubled_input(rng):
    head = _head(1)
    head.gproj = (np.zeros_like(head.gproj[0]), np.zeros_like(head.gproj[1]))
    os = rand(rng, 16, 16, 128)
    g = rand(rng, 1, 384)
    plain = CornerHead(CFG, init_state(CornerHead.param_shapes(CFG, True), 1), use_g=False)
    with_g = head_forward(head, g, os)
    # g' = 0 reduces the re-weighting to a uniform factor 2, so the g-path sees exactly 2*os
    assert with_g == head_forward(plain, g, 2 * os)


def test_head_macs_are_scoped():
    with T.count_macs() as c:
        head_forward(_head(2), np.zeros((1, 384), np.float32), np.zeros((16, 16, 128), np.float32))
    assert c.total == c.scoped("head") > 0
