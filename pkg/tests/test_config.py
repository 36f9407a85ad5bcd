import pytest

from autoregtrack.config import ConfigError, from_mapping, parse_kv, split_config, to_lines
from autoregtrack.loss import LossWeights
from autoregtrack.model import ModelConfig, ReconTarget
from autoregtrack.train import TrainConfig


def test_parse_kv_comments_and_spacing():
    text = "# comment\nembed_dim = 32\n\n  heads=2  \n"
    assert parse_kv(text) == {"embed_dim": "32", "heads": "2"}


@pytest.mark.parametrize("bad", ["novalue\n", "a = 1\na = 2\n", " = 3\n"])
def test_parse_kv_errors(bad):
    with pytest.raises(ConfigError):
        parse_kv(bad)


def test_from_mapping_coerces_types():
    cfg = from_mapping(ModelConfig, {"embed_dim": "32", "use_trajectory": "false",
                                     "reconstruction_target": "pixel", "mask_ratio": "0.5"})
    assert cfg.embed_dim == 32 and cfg.use_trajectory is False
    assert cfg.reconstruction_target is ReconTarget.PIXEL and cfg.mask_ratio == 0.5


def test_unknown_key_is_error():
    with pytest.raises(ConfigError):
        from_mapping(ModelConfig, {"embed_dimension": "3"})


def test_split_routes_keys():
    m, t, w = split_config({"heads": "2", "steps": "5", "lambda_mse": "0"},
                           ModelConfig, TrainConfig, LossWeights)
    assert m == {"heads": "2"} and t == {"steps": "5"} and w == {"lambda_mse": "0"}
    with pytest.raises(ConfigError):
        split_config({"bogus": "1"}, ModelConfig)


def test_to_lines_round_trip():
    cfg = ModelConfig(embed_dim=32, heads=2, vocab=128)
    assert ModelConfig.from_text("\n".join(to_lines(cfg))) == cfg
