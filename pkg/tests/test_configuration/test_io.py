from __future__ import annotations

import json
from pathlib import Path

import pytest

from meltrec.config import SCHEMA_VERSION, RunConfig, TrainConfig
from meltrec.errors import ConfigError


@pytest.mark.parametrize("name", ["config.json", "config.yaml", "config.yml"])
def test_save_and_load(tmp_path: Path, name: str) -> None:
    config = RunConfig.config_validate({
        "schema_version": SCHEMA_VERSION,
        "workdir": str(tmp_path / "work"),
        "train": {"lambda_u": 0.3, "seed": 11},
    })
    config.config_save(tmp_path / name)
    assert RunConfig.config_load(tmp_path / name) == config


def test_saved_config_is_fully_defaulted(tmp_path: Path) -> None:
    RunConfig(schema_version=SCHEMA_VERSION).config_save(tmp_path / "config.json")
    data = json.loads((tmp_path / "config.json").read_text())
    assert data["train"]["e_max"] == 30
    assert data["evaluation"]["n_negatives"] == 100
    assert data["encoder"]["d"] == 50


def test_load_toml(tmp_path: Path) -> None:
    (tmp_path / "train.toml").write_text("alpha = 0.5\nlambda_i = 0.2\n")
    config = TrainConfig.config_load(tmp_path / "train.toml")
    assert (config.alpha, config.lambda_i) == (0.5, 0.2)


def test_load_with_overrides(tmp_path: Path) -> None:
    (tmp_path / "train.json").write_text('{"alpha": 0.5}')
    config = TrainConfig.config_load(tmp_path / "train.json", seed=4)
    assert (config.alpha, config.seed) == (0.5, 4)


def test_extend_and_update(tmp_path: Path) -> None:
    (tmp_path / "base.json").write_text(
        json.dumps({
            "schema_version": 1,
            "train": {"alpha": 0.5, "lambda_u": 0.1},
            "grid": {"train.lambda_i": [0.1]},
        })
    )
    (tmp_path / "runs").mkdir()
    (tmp_path / "runs" / "seed3.yaml").write_text(
        "^extend: ../base.json\n"
        "train:\n"
        "  seed: 3\n"
        "+grid:\n"
        "  train.lambda_u: [0.2, 0.3]\n"
    )
    config = RunConfig.config_load(tmp_path / "runs" / "seed3.yaml")
    # A plain key replaces the inherited section; a `+` key merges into it.
    assert config.train.seed == 3
    assert config.train.alpha == 0.2
    assert config.grid == {"train.lambda_i": [0.1], "train.lambda_u": [0.2, 0.3]}


@pytest.mark.parametrize(
    "content",
    ['{"alpha": ', "[1, 2]", '{"alpha": 2.0}', '{"^no_such_macro": 1}'],
)
def test_load_invalid(tmp_path: Path, content: str) -> None:
    (tmp_path / "train.json").write_text(content)
    with pytest.raises(ConfigError):
        TrainConfig.config_load(tmp_path / "train.json")


def test_load_missing(tmp_path: Path) -> None:
    with pytest.raises(ConfigError):
        TrainConfig.config_load(tmp_path / "missing.json")


def test_extend_missing(tmp_path: Path) -> None:
    (tmp_path / "train.json").write_text('{"^extend": "nowhere.json"}')
    with pytest.raises(ConfigError):
        TrainConfig.config_load(tmp_path / "train.json")


def test_load_unknown_extension(tmp_path: Path) -> None:
    (tmp_path / "train.ini").write_text("alpha = 0.2\n")
    with pytest.raises(ConfigError, match="extension '.ini'"):
        TrainConfig.config_load(tmp_path / "train.ini")


def test_extend_unknown_extension(tmp_path: Path) -> None:
    (tmp_path / "base.cfg").write_text("alpha = 0.2\n")
    (tmp_path / "train.json").write_text('{"^extend": "base.cfg"}')
    with pytest.raises(ConfigError, match="extension '.cfg'"):
        TrainConfig.config_load(tmp_path / "train.json")
