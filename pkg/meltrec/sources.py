"""Sources and destinations that hold configuration and artifact mappings."""

from __future__ import annotations

from io import StringIO
from os import PathLike
from pathlib import Path
from typing import TYPE_CHECKING, Any, TypedDict

from meltrec.formats.base import DataFormat

if TYPE_CHECKING:
    from typing_extensions import Unpack

    from meltrec.formats.base import Data
    from meltrec.formats.std_json import JSONOptions
    from meltrec.formats.toml import TOMLOptions
    from meltrec.formats.yaml import YAMLOptions

    class FormatOptions(TypedDict, total=False):
        json: JSONOptions
        toml: TOMLOptions
        yaml: YAMLOptions


__all__ = (
    "FileSource",
    "get_file_source",
)


def _make_path(source: str | PathLike[str]) -> Path:
    if isinstance(source, PathLike):
        source = source.__fspath__()
    return Path(source)


class FileSource:
    """
    A mapping stored in a text file.

    Parameters
    ----------
    source
        The path to the file.
    data_format
        The format name (e.g. ``"json"``) or instance. Guessed from the file
        extension when omitted.

    """

    source: Path
    options: FormatOptions

    def __init__(
        self,
        source: str | PathLike[str],
        data_format: str | DataFormat[Any] | None = None,
        **options: Unpack[FormatOptions],
    ) -> None:
        self.source = _make_path(source)
        self.options = options
        self.data_format = data_format  # type: ignore[assignment]

    @property
    def data_format(self) -> DataFormat[Any]:
        """The current data format for this file."""
        return self._data_format

    @data_format.setter
    def data_format(self, data_format: str | DataFormat[Any] | None) -> None:
        if data_format is None:
            data_format = self._guess_data_format()
        elif isinstance(data_format, str):
            data_format = DataFormat.for_extension(
                data_format,
                self.options.get(data_format),  # type: ignore[arg-type]
            )
        self._data_format = data_format

    def _guess_data_format(self) -> DataFormat[Any]:
        suffix = self.source.suffix
        if suffix:
            extension = suffix.replace(".", "", 1)
            data_format_class = DataFormat.extension_registry.get(extension)
            if data_format_class is not None:
                return data_format_class(
                    self.options.get(data_format_class.option_name) or {},  # type: ignore[arg-type]
                )
        msg = (
            f"Cannot guess the data format of {self.source} "
            f"with extension {suffix!r}"
        )
        raise NotImplementedError(msg)

    def load(self) -> Data:
        """Load the file and return its contents as a mapping."""
        return self.data_format.load(StringIO(self.read()))

    def dump(self, data: Data) -> None:
        """Write a mapping to the file, replacing its contents."""
        temp_stream = StringIO()
        self.data_format.dump(data, temp_stream)
        self.write(temp_stream.getvalue())

    def read(self) -> str:
        """Read the file and return its contents."""
        return self.source.read_text(encoding="utf-8")

    def write(self, content: str) -> int:
        """Write the file and return the number of characters written."""
        self.source.parent.mkdir(parents=True, exist_ok=True)
        return self.source.write_text(content, encoding="utf-8")

    def relative(self, other: str | PathLike[str]) -> FileSource:
        """Return a source for a path given relative to this file."""
        path = _make_path(other)
        if not path.is_absolute():
            path = self.source.parent / path
        return FileSource(path, **self.options)

    def __repr__(self) -> str:
        """Represent this source in a string."""
        return f"{type(self).__name__}({str(self.source)!r})"


def get_file_source(
    source: str | PathLike[str] | FileSource,
    data_format: str | DataFormat[Any] | None = None,
) -> FileSource:
    """Get a dedicated interface for a file holding a mapping."""
    if isinstance(source, FileSource):
        return source
    return FileSource(source, data_format=data_format)
