from __future__ import annotations

from pathlib import Path

import pytest

from meltrec.formats import JSONDataFormat, TOMLDataFormat, YAMLDataFormat
from meltrec.sources import FileSource, get_file_source


@pytest.mark.parametrize(
    "name, format_class",
    [
        ("run.json", JSONDataFormat),
        ("run.toml", TOMLDataFormat),
        ("run.yaml", YAMLDataFormat),
        ("run.yml", YAMLDataFormat),
    ],
)
def test_format_from_extension(name: str, format_class: type) -> None:
    assert isinstance(FileSource(name).data_format, format_class)


def test_unknown_extension() -> None:
    with pytest.raises(NotImplementedError):
        FileSource("run.ini")


def test_explicit_format(tmp_path: Path) -> None:
    source = FileSource(tmp_path / "run.conf", data_format="json")
    source.dump({"alpha": 0.5})
    assert source.load() == {"alpha": 0.5}


def test_format_options(tmp_path: Path) -> None:
    FileSource(tmp_path / "compact.json", json={"indent": None}).dump({"a": [1, 2]})
    FileSource(tmp_path / "pretty.json").dump({"a": [1, 2]})
    assert (tmp_path / "compact.json").read_text() == '{"a": [1, 2]}\n'
    assert (tmp_path / "pretty.json").read_text().count("\n") > 1


def test_dump_creates_parents(tmp_path: Path) -> None:
    source = FileSource(tmp_path / "a" / "b" / "stats.json")
    source.dump({"users": 3})
    assert source.load() == {"users": 3}


def test_relative(tmp_path: Path) -> None:
    source = FileSource(tmp_path / "runs" / "run.json")
    assert source.relative("../base.yaml").source == tmp_path / "runs" / ".." / "base.yaml"
    assert source.relative(tmp_path / "x.json").source == tmp_path / "x.json"


def test_get_file_source() -> None:
    source = FileSource("run.json")
    assert get_file_source(source) is source
    assert get_file_source("run.toml").source == Path("run.toml")
