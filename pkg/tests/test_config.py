import pytest

from config import Config
from core.container import init_container
from core.errors import ConfigError
from core.parallel import get_max_workers


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "tallyfit.cfg"
    path.write_text("# tuned for the county files\nlr=0.001\nTHREADS=2\nnn_checkpoints=5,10\nstandardize=false\n")
    return str(path)


def test_defaults():
    cfg = Config(use_env=False)
    assert cfg.lr == 2e-5
    assert (cfg.iters_total, cfg.iters_phase1, cfg.iters_phase3) == (120, 10, 10)
    assert cfg.nn_checkpoints == (50, 100, 150, 200)
    assert cfg.threads == 1 and cfg.seed == 0
    assert cfg.as_dict()["nn_checkpoints"] == [50, 100, 150, 200]


def test_config_file_values(config_file):
    cfg = Config(config_file=config_file, use_env=False)
    assert cfg.lr == 0.001
    assert cfg.threads == 2
    assert cfg.nn_checkpoints == (5, 10)
    assert cfg.standardize is False


def test_precedence(monkeypatch, config_file):
    monkeypatch.setenv("TALLYFIT_THREADS", "3")
    assert Config().threads == 3
    assert Config(config_file=config_file).threads == 2
    assert Config(config_file=config_file, overrides={"threads": 4}).threads == 4
    assert Config(config_file=config_file, overrides={"threads": None}).threads == 2


def test_unknown_key_names_the_file(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("learning_rate=0.1\n")
    with pytest.raises(ConfigError, match="learning_rate") as info:
        Config(config_file=str(path), use_env=False)
    assert info.value.source == str(path)


def test_unparseable_value(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("iters_total=many\n")
    with pytest.raises(ConfigError, match="iters_total"):
        Config(config_file=str(path), use_env=False)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        Config(config_file=str(tmp_path / "absent.cfg"), use_env=False)


@pytest.mark.parametrize("overrides", [
    {"lr": 0},
    {"iters_total": 5},
    {"bt_shrink": 1.0},
    {"nn_checkpoints": "100,50"},
    {"threads": 0},
    {"phi2_floor": -1},
    {"bt_growth": 0.5},
])
def test_validation(overrides):
    with pytest.raises(ConfigError):
        Config(overrides=overrides, use_env=False)


def test_container_wiring(mocker):
    setup = mocker.patch("core.container.setup_logging")
    container = init_container(overrides={"lr": 1e-3, "threads": 2, "nn_hidden": 4, "seed": 9}, use_env=False)
    setup.assert_called_once_with("INFO", None)
    assert get_max_workers() == 2
    assert container.fit_config.lr == 1e-3
    assert container.fit_config.seed == 9
    assert container.fit_config.bt_growth == 2.0
    assert container.neural_config.hidden == 4
    assert container.neural_config.seed == 9
    variant = container.fit_config_for("gauss-bt", iters_total=30)
    assert (variant.method, variant.iters_total, variant.lr) == ("gauss-bt", 30, 1e-3)
