import pytest

from autoregtrack import cli
from autoregtrack.model import load_checkpoint

TINY = """embed_dim = 16
encoder_layers = 1
heads = 2
patch_size = 4
template_side = 8
search_side = 16
vocab = 32
trajectory_len = 2
decoder_layers = 1
mlp_ratio = 2
clip_len = 3
steps = 2
length = 5
"""


@pytest.fixture
def workspace(tmp_path):
    cfg = tmp_path / "tiny.cfg"
    cfg.write_text(TINY)
    data = tmp_path / "data"
    assert cli.main(["gen-data", "--config", str(cfg), "--out", str(data), "--count", "2",
                     "--seed", "1", "-q"]) == 0
    return tmp_path, cfg, data


def test_gen_data_layout(workspace):
    _, _, data = workspace
    assert (data / "manifest.txt").exists()
    assert (data / "seq_0000" / "groundtruth.txt").exists()
    assert (data / "seq_0001" / "frames" / "000005.ppm").exists()
    assert "seed = 1" in (data / "manifest.txt").read_text()


def test_pipeline_and_determinism(workspace):
    root, cfg, data = workspace
    for run in ("a", "b"):
        assert cli.main(["train", "--config", str(cfg), "--dataset", str(data),
                         "--out", str(root / run), "-q"]) == 0
    a, b = root / "a" / "checkpoint.ckpt", root / "b" / "checkpoint.ckpt"
    assert a.read_bytes() == b.read_bytes()
    assert (root / "a" / "loss.tsv").read_text() == (root / "b" / "loss.tsv").read_text()
    load_checkpoint(a)
    assert cli.main(["track", "--checkpoint", str(a), "--sequence", str(data),
                     "--out", str(root / "res"), "--jobs", "2"]) == 0
    assert (root / "res" / "seq_0000.txt").exists()
    assert cli.main(["eval", "--results", str(root / "res"), "--dataset", str(data),
                     "--out", str(root / "ev")]) == 0
    metrics = (root / "ev" / "metrics.tsv").read_text().splitlines()
    assert len(metrics) == 4 and metrics[-1].startswith("ALL")
    assert len((root / "ev" / "curve.tsv").read_text().splitlines()) == 22


def test_grad_check_command(tmp_path, capsys):
    assert cli.main(["grad-check", "--out", str(tmp_path), "--trials", "1"]) == 0
    assert "masked_attention" in capsys.readouterr().out


def test_ablate_grid(workspace):
    root, cfg, data = workspace
    assert cli.main(["ablate", "masking_ratio=0,0.5,0.9", "--config", str(cfg),
                     "--dataset", str(data), "--out", str(root / "abl"), "-q"]) == 0
    rows = (root / "abl" / "ablation.tsv").read_text().splitlines()
    assert rows[0].startswith("mask_ratio") and len(rows) == 4


def test_unknown_config_key_exit_2(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("embed_dimension = 3\n")
    with pytest.raises(SystemExit) as exc:
        cli.main(["grad-check", "--config", str(bad), "--out", str(tmp_path / "o")])
    assert exc.value.code == 2


def test_unknown_flag_exit_2(tmp_path):
    with pytest.raises(SystemExit) as exc:
        cli.main(["train", "--out", str(tmp_path), "--bogus"])
    assert exc.value.code == 2


def test_bad_grid_key_exit_2(tmp_path):
    with pytest.raises(SystemExit) as exc:
        cli.main(["ablate", "nonsense=1,2", "--out", str(tmp_path), "--dataset", "x"])
    assert exc.value.code == 2


def test_missing_dataset_exit_2(tmp_path):
    assert cli.main(["train", "--out", str(tmp_path)]) == 2


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_numeric_failure_exit_3(workspace):
    root, cfg, data = workspace
    hot = root / "hot.cfg"
    hot.write_text(TINY.replace("steps = 2", "steps = 4") + "lr_other = 1e300\nlr_backbone = 1e300\n"
                   "warmup_steps = 0\n")
    code = cli.main(["train", "--config", str(hot), "--dataset", str(data),
                     "--out", str(root / "hot"), "-q"])
    assert code == 3
    assert "numeric failure" in (root / "hot" / "manifest.txt").read_text()
