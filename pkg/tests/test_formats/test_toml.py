from __future__ import annotations

from io import StringIO

from meltrec.formats import TOMLDataFormat


def test_load_returns_plain_containers() -> None:
    data = TOMLDataFormat().load(StringIO("[train]\nalpha = 0.5\nseeds = [1, 2]\n"))
    assert data == {"train": {"alpha": 0.5, "seeds": [1, 2]}}
    assert type(data["train"]) is dict


def test_dump_and_load() -> None:
    stream = StringIO()
    TOMLDataFormat().dump({"schema_version": 1, "train": {"alpha": 0.5}}, stream)
    stream.seek(0)
    assert TOMLDataFormat().load(stream) == {"schema_version": 1, "train": {"alpha": 0.5}}
