import numpy as np
import pytest

from hit.backbone import Backbone, ModelConfig, PatchEmbed, backbone_forward, patch_embed, stage_token_split
from hit.errors import DimensionError
from hit.model import init_state

from conftest import cached_model, image_pair


def _zero_state(cfg):
    shapes = Backbone.param_shapes(cfg)
    state = {k: np.zeros(v, np.float32) for k, v in shapes.items()}
    for k in state:
        if k.endswith(".scale"):
            state[k][:] = 1
    return state


@pytest.mark.parametrize("variant, c", [("base", (384, 512, 768)), ("small", (128, 256, 384)), ("tiny", (128, 256, 384))])
def test_pyramid_shapes(variant, c):
    cfg = ModelConfig.named(variant)
    fp = cached_model(variant).backbone(*image_pair(0, cfg))
    assert fp.s_max.shape == (16, 16, c[0])
    assert fp.s_mid.shape == (8, 8, c[1])
    assert fp.s_min.shape == (4, 4, c[2])
    assert fp.g.shape == (1, c[2])


def test_patch_embed_token_counts():
    cfg = ModelConfig.tiny()
    embed = PatchEmbed.from_state(init_state(PatchEmbed.param_shapes(128), seed=1))
    z, x = image_pair(1, cfg)
    assert patch_embed(embed, x).shape == (256, 128)
    assert patch_embed(embed, z).shape == (64, 128)


def test_patch_embed_zero_image_zero_bias():
    shapes = PatchEmbed.param_shapes(128)
    state = init_state(shapes, seed=2)
    for k in state:
        if k.endswith(".b"):
            state[k][:] = 0
    out = patch_embed(PatchEmbed.from_state(state), np.zeros((128, 128, 3), np.float32))
    assert not out.any()


def test_patch_embed_rejects_indivisible():
    embed = PatchEmbed.from_state(init_state(PatchEmbed.param_shapes(128)))
    with pytest.raises(DimensionError):
        patch_embed(embed, np.zeros((120, 128, 3), np.float32))


@pytest.mark.parametrize("stage, expected", [(1, (256, 64)), (2, (64, 16)), (3, (16, 4))])
def test_stage_token_split(stage, expected):
    arr = ModelConfig.base().arrangement(stage=stage)
    s, t = stage_token_split(np.zeros((sum(expected), 2), np.float32), arr)
    assert (len(s), len(t)) == expected


def test_stage_token_split_count_mismatch():
    with pytest.raises(DimensionError):
        stage_token_split(np.zeros((10, 2), np.float32), ModelConfig.base().arrangement())


def test_stage_token_bookkeeping_base():
    cfg = ModelConfig.base()
    fp = cached_model("base").backbone(*image_pair(0, cfg))
    for i, tokens in enumerate(fp.stage_tokens, start=1):
        assert tokens.shape[0] == (16 >> (i - 1)) ** 2 + (8 >> (i - 1)) ** 2


def test_g_is_mean_of_final_tokens():
    cfg = ModelConfig.tiny()
    fp = cached_model("tiny").backbone(*image_pair(3, cfg))
    # recompute: last junction output goes through stage 3, whose final tokens are stage_tokens[2]
    np.testing.assert_allclose(fp.g[0], fp.stage_tokens[2].astype(np.float64).mean(axis=0), atol=1e-6)


def test_zero_weight_model_gives_zero_g():
    cfg = ModelConfig.tiny()
    bb = Backbone(cfg, _zero_state(cfg))
    assert not bb(*image_pair(0, cfg)).g.any()


def test_template_does_not_reach_search_when_attention_is_zero():
    cfg = ModelConfig.tiny()
    state = init_state(Backbone.param_shapes(cfg), seed=4)
    for k in state:
        if ".attn." in k or k.startswith("sa") and not k.startswith("sa1.mlp") and not k.startswith("sa2.mlp"):
            state[k][:] = 0
    bb = Backbone(cfg, state)
    z, x = image_pair(5, cfg)
    a = bb(z, x).s_max
    b = bb(z[::-1, ::-1].copy(), x).s_max
    np.testing.assert_array_equal(a, b)


def test_forward_is_bitwise_deterministic():
    cfg = ModelConfig.tiny()
    bb = cached_model("tiny").backbone
    z, x = image_pair(6, cfg)
    a, b = bb(z, x), bb(z, x)
    for u, v in zip((a.s_max, a.s_mid, a.s_min, a.g), (b.s_max, b.s_mid, b.s_min, b.g)):
        assert u.tobytes() == v.tobytes()


def test_wrong_input_sizes_rejected():
    cfg = ModelConfig.tiny()
    z, x = image_pair(0, cfg)
    with pytest.raises(DimensionError):
        backbone_forward(cached_model("tiny").backbone, x, z)


def test_unknown_variant():
    with pytest.raises(ValueError):
        ModelConfig.named("huge")
