import functools

import numpy as np
import pytest

from hit.ablation import AblationSpec
from hit.attention import Linear
from hit.backbone import ModelConfig
from hit.model import HiT


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def rand(rng, *shape, scale=1.0):
    return (rng.normal(size=shape) * scale).astype(np.float32)


def rand_linear(rng, n_in, n_out, scale=0.5):
    return Linear(rand(rng, n_in, n_out, scale=scale), rand(rng, n_out, scale=0.1))


@functools.lru_cache(maxsize=None)
def cached_model(variant="tiny", seed=0, spec=AblationSpec()):
    return HiT.init(ModelConfig.named(variant), spec, seed=seed)


def image_pair(seed=0, cfg=None):
    cfg = cfg or ModelConfig.tiny()
    g = np.random.default_rng(seed)
    return (
        g.random((cfg.template_size, cfg.template_size, 3), dtype=np.float32),
        g.random((cfg.search_size, cfg.search_size, 3), dtype=np.float32),
    )
