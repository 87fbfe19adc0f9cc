"""`meltrec.formats.std_json`: The JSON data format."""

from __future__ import annotations

from json import JSONDecoder, JSONEncoder
from typing import IO, TYPE_CHECKING, ClassVar

from meltrec.formats.base import DataFormat, DataFormatOptions

if TYPE_CHECKING:
    from typing_extensions import Unpack

    from meltrec.formats.base import Data


__all__ = (
    "JSONDataFormat",
    "JSONOptions",
)


class JSONOptions(DataFormatOptions, total=False):
    """Prototype of the allowed options for the JSON data format."""

    indent: int | None  # JSONEncoder
    sort_keys: bool  # JSONEncoder
    ensure_ascii: bool  # JSONEncoder
    allow_nan: bool  # JSONEncoder


class JSONDataFormat(DataFormat[JSONOptions]):
    """The JSON data format."""

    option_name: ClassVar[str] = "json"

    # Subclass and override for global effect.
    json_encoder: JSONEncoder = JSONEncoder(indent=2)
    json_decoder: JSONDecoder = JSONDecoder()

    default_extension: ClassVar[str] = "json"

    def configure(self, **options: Unpack[JSONOptions]) -> None:
        """For the documentation of the options, see the JSONOptions class."""
        self.json_encoder = JSONEncoder(
            indent=options.get("indent", self.json_encoder.indent),
            sort_keys=options.get("sort_keys", self.json_encoder.sort_keys),
            ensure_ascii=options.get("ensure_ascii", self.json_encoder.ensure_ascii),
            allow_nan=options.get("allow_nan", self.json_encoder.allow_nan),
        )

    def load(self, stream: IO[str]) -> Data:
        """Load the JSON data from the given stream."""
        text = stream.read()
        document = self.json_decoder.decode(text) if text.strip() else {}
        return self.ensure_mapping(document)

    def dump(self, data: Data, stream: IO[str]) -> None:
        """Dump the given JSON data to the given stream."""
        stream.write(self.json_encoder.encode(data))
        stream.write("\n")
