"""`meltrec.formats.yaml`: The YAML data format."""

from __future__ import annotations

from typing import TYPE_CHECKING, ClassVar

from ruamel.yaml import YAML

from meltrec.formats.base import DataFormat, DataFormatOptions

if TYPE_CHECKING:
    from typing import IO

    from typing_extensions import Unpack

    from meltrec.formats.base import Data

__all__ = (
    "YAMLDataFormat",
    "YAMLOptions",
)


class YAMLOptions(DataFormatOptions, total=False):
    """
    Prototype of the allowed options for the YAML data format.

    For more information, see the documentation of the `ruamel.yaml.YAML` class.
    """

    default_flow_style: bool | None
    """Whether to emit collections in flow style (inline)."""


class YAMLDataFormat(DataFormat[YAMLOptions]):
    """The YAML data format."""

    option_name: ClassVar[str] = "yaml"

    # Subclass and override for global effect.
    yaml: YAML = YAML(typ="safe", pure=True)

    default_extension: ClassVar[str] = "yml"
    file_extensions: ClassVar[set[str]] = {"yaml"}

    def configure(self, **options: Unpack[YAMLOptions]) -> None:
        """For the documentation of the options, see the YAMLOptions class."""
        yaml = YAML(typ="safe", pure=True)
        yaml.default_flow_style = options.get("default_flow_style", False)
        self.yaml = yaml

    def load(self, stream: IO[str]) -> Data:
        """Load the data from a stream."""
        return self.ensure_mapping(self.yaml.load(stream))

    def dump(self, data: Data, stream: IO[str]) -> None:
        """Dump the data to a stream."""
        self.yaml.dump(dict(data), stream)
