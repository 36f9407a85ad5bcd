import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from autoregtrack.model import ModelConfig

settings.register_profile("repo", deadline=None, max_examples=50,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def micro_cfg():
    """37-token layout: 4 template, 16 search, 4 appearance, 8 trajectory, 4 command, 1 confidence."""
    return ModelConfig(embed_dim=16, encoder_layers=1, heads=2, patch_size=4, template_side=8,
                       search_side=16, vocab=32, trajectory_len=2, decoder_layers=1,
                       mlp_ratio=2)
