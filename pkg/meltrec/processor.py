"""
Replacement API processor for configuration data.

Allows a run configuration to be composed from other configuration files
before it is given to the model config: `^extend` transcludes another file
and `+key` merges into an inherited value instead of replacing it.
"""

from __future__ import annotations

from collections.abc import Mapping, MutableMapping, MutableSequence, Sequence
from copy import copy
from functools import partial
from typing import TYPE_CHECKING, ClassVar, TypedDict, cast

from meltrec.errors import ConfigError

if TYPE_CHECKING:
    from collections.abc import Callable
    from typing import TypeVar

    from typing_extensions import TypeAlias

    from meltrec.formats.base import Data
    from meltrec.sources import FileSource

    Macro: TypeAlias = "Callable[..., Data]"
    MacroT = TypeVar("MacroT", bound=Macro)
    MacroDict: TypeAlias = "dict[str, Macro]"


__all__ = (
    "ConfigProcessor",
    "FileSystemAwareConfigProcessor",
    "ProcessorOptions",
    "macro",
)

MACRO_FUNC: str = "__meltrec_macro_func__"
MAX_DEPTH: int = 16


class ProcessorOptions(TypedDict, total=False):
    """Prototype of the allowed options for the ConfigProcessor class."""

    macro_prefix: str
    update_prefix: str
    lenient: bool


def merge_update(existing: object, value: object) -> object:
    """Update (NOT replace) an existing value with a new value."""
    if isinstance(existing, MutableMapping) and isinstance(value, Mapping):
        substitute = copy(existing)
        for key, item in value.items():
            if key in substitute:
                substitute[key] = merge_update(substitute[key], item)
            else:
                substitute[key] = item
        return substitute
    if isinstance(existing, MutableSequence) and isinstance(value, Sequence):
        merged = copy(existing)
        merged.extend(value)
        return merged
    if isinstance(existing, (Mapping, Sequence)) and not isinstance(existing, str):
        msg = f"Cannot update {type(existing).__name__} with {type(value).__name__}"
        raise ConfigError(msg)
    return value


class ConfigProcessor:
    """
    A class that takes in configuration data and processes it.

    Macros are keys starting with the macro prefix; their content replaces
    the key. Keys starting with the update prefix are merged into the
    existing value rather than overwriting it.
    """

    _macros: ClassVar[MacroDict]

    def __init__(
        self,
        initial: Data,
        *,
        macro_prefix: str = "^",
        update_prefix: str = "+",
        lenient: bool = False,
        _depth: int = 0,
    ) -> None:
        self.__initial = initial
        self._depth = _depth
        self.options = ProcessorOptions(
            macro_prefix=macro_prefix,
            update_prefix=update_prefix,
            lenient=lenient,
        )

    @property
    def macros(self) -> MacroDict:
        """Get macros bound to this processor."""
        return {
            macro_name: macro.__get__(self, type(self))
            for macro_name, macro in self._macros.items()
        }

    @property
    def initial(self) -> Data:
        """The initial configuration data that the processor was given."""
        return self.__initial

    def create_processor(self, data: Data) -> ConfigProcessor:
        """Create a nested processor with identical options."""
        if self._depth >= MAX_DEPTH:
            msg = f"Configuration extends nest deeper than {MAX_DEPTH} levels"
            raise ConfigError(msg)
        return type(self)(data, **self.options, _depth=self._depth + 1)

    def get_processed_data(self) -> dict[str, object]:
        """Apply all macros and updates and return plain configuration data."""
        return self._process_mapping(self.__initial)

    def _process_mapping(self, data: Mapping[str, object]) -> dict[str, object]:
        macro_prefix = self.options["macro_prefix"]
        update_prefix = self.options["update_prefix"]
        processed: dict[str, object] = {}
        updates: list[tuple[str, object]] = []
        # Macros go first so that plain keys in the including file win.
        for key, value in data.items():
            if key.startswith(macro_prefix):
                macro_name = self.sanitize_macro_name(key[len(macro_prefix) :])
                try:
                    macro = self.macros[macro_name]
                except KeyError as err:
                    if self.options["lenient"]:
                        continue
                    msg = f"No such macro: {macro_name!r}"
                    raise ConfigError(msg) from err
                processed.update(cast("Mapping[str, object]", merge_update({}, macro(value))))
        for key, value in data.items():
            if key.startswith(macro_prefix):
                continue
            if key.startswith(update_prefix):
                updates.append((key[len(update_prefix) :], value))
                continue
            processed[key] = self._process_value(value)
        for key, value in updates:
            processed[key] = merge_update(
                processed.get(key, type(value)()),
                self._process_value(value),
            )
        return processed

    def _process_value(self, value: object) -> object:
        if isinstance(value, Mapping):
            return self._process_mapping(value)
        return value

    def __init_subclass__(cls) -> None:
        """Merge macro registries on subclass."""
        macros_from_class_dict = {
            macro_name: func
            for func in vars(cls).values()
            if (macro_name := getattr(func, MACRO_FUNC, None))
        }
        cls._macros = {**getattr(cls.__base__, "_macros", {}), **macros_from_class_dict}

    @staticmethod
    def sanitize_macro_name(name: str) -> str:
        """Ensure a uniform name of every macro."""
        return name.strip().casefold()


ConfigProcessor.__init_subclass__()


def macro(
    func_or_name: MacroT | str,
    func: MacroT | None = None,
) -> MacroT | Callable[[MacroT], MacroT]:
    """Mark a processor method as a macro available under a given name."""
    if callable(func_or_name):
        if func is None:
            func = cast("MacroT", func_or_name)
            return macro(func.__name__, func)
        msg = "Invalid macro() usage"
        raise ValueError(msg)
    if func is None:
        return partial(macro, func_or_name)
    setattr(func, MACRO_FUNC, func_or_name)
    return func


class FileSystemAwareConfigProcessor(ConfigProcessor):
    """
    Config processor that is aware of the file system.

    Can handle requests for transcluding other configuration files
    to achieve a sense of extendability.
    """

    def __init__(
        self,
        initial: Data,
        *,
        origin: FileSource | None = None,
        **options: object,
    ) -> None:
        super().__init__(initial, **options)  # type: ignore[arg-type]
        self.origin = origin

    def create_processor(
        self,
        data: Data,
        origin: FileSource | None = None,
    ) -> ConfigProcessor:
        """Create a nested processor for a transcluded file."""
        processor = super().create_processor(data)
        cast("FileSystemAwareConfigProcessor", processor).origin = origin
        return processor

    @macro
    def extend(self, sources: str | list[str]) -> Data:
        """Transclude configs in this config; later files win."""
        from meltrec.sources import get_file_source

        merged: dict[str, object] = {}
        for name in [sources] if isinstance(sources, str) else sources:
            source = (
                self.origin.relative(name)
                if self.origin is not None
                else get_file_source(name)
            )
            try:
                data = source.load()
            except FileNotFoundError as err:
                msg = f"Cannot extend with missing config file {source.source}"
                raise ConfigError(msg) from err
            nested = self.create_processor(data, origin=source)
            merged = cast("dict[str, object]", merge_update(merged, nested.get_processed_data()))
        return merged
