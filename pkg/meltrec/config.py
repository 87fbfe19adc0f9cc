"""Validated configuration models built on [`BaseConfig`][meltrec.config.BaseConfig]."""

from __future__ import annotations

import itertools
from pathlib import Path
from typing import TYPE_CHECKING, Any, ClassVar, Literal, cast

import torch
from pydantic import Field, ValidationError, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from meltrec.errors import ConfigError
from meltrec.processor import FileSystemAwareConfigProcessor, merge_update
from meltrec.sources import get_file_source

if TYPE_CHECKING:
    from collections.abc import Iterator
    from os import PathLike

    from pydantic_settings import PydanticBaseSettingsSource
    from typing_extensions import Self

    from meltrec.sources import FileSource


__all__ = (
    "SCHEMA_VERSION",
    "BaseConfig",
    "EncoderConfig",
    "Environment",
    "EvalConfig",
    "RunConfig",
    "SyntheticConfig",
    "TrainConfig",
)

SCHEMA_VERSION = 1


class BaseConfig(BaseSettings):
    """
    Base class for all configuration models.

    Values come from keyword arguments and configuration files only;
    see [`Environment`][meltrec.config.Environment] for the environment.
    """

    model_config: ClassVar[SettingsConfigDict] = SettingsConfigDict(
        # Keep the configuration valid & fail-proof for the whole time.
        validate_assignment=True,
        # Make it easier to spot typos.
        extra="forbid",
    )

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: type[BaseSettings],  # noqa: ARG003
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,  # noqa: ARG003
        dotenv_settings: PydanticBaseSettingsSource,  # noqa: ARG003
        file_secret_settings: PydanticBaseSettingsSource,  # noqa: ARG003
    ) -> tuple[PydanticBaseSettingsSource, ...]:
        """Read values from keyword arguments only."""
        return (init_settings,)

    @classmethod
    def config_validate(cls, data: dict[str, Any], *, origin: object = None) -> Self:
        """Validate plain data, reporting failures as a `ConfigError`."""
        try:
            return cls(**data)
        except ValidationError as err:
            where = f" in {origin}" if origin is not None else ""
            msg = f"Invalid {cls.__name__}{where}: {err}"
            raise ConfigError(msg) from err

    @classmethod
    def config_load(
        cls,
        source: str | PathLike[str] | FileSource,
        **overrides: Any,
    ) -> Self:
        """
        Load this configuration from a given source.

        Parameters
        ----------
        source
            Where to load the configuration from. The data format is guessed
            from the file extension (`.json`, `.toml`, `.yml`/`.yaml`).
        overrides
            Values merged over the loaded data before validation.

        Returns
        -------
        self

        """
        try:
            config_source = get_file_source(source)
        except NotImplementedError as err:
            raise ConfigError(str(err)) from err
        try:
            initial = config_source.load()
        except FileNotFoundError as err:
            msg = f"Configuration file {config_source.source} does not exist"
            raise ConfigError(msg) from err
        except (TypeError, ValueError) as err:
            msg = f"Cannot parse configuration file {config_source.source}: {err}"
            raise ConfigError(msg) from err
        processor = FileSystemAwareConfigProcessor(initial, origin=config_source)
        try:
            processed = processor.get_processed_data()
        except NotImplementedError as err:
            raise ConfigError(str(err)) from err
        data = cast("dict[str, Any]", merge_update(processed, overrides))
        return cls.config_validate(data, origin=config_source.source)

    def config_save(self, destination: str | PathLike[str] | FileSource) -> Self:
        """Save the effective, fully defaulted configuration to a destination."""
        get_file_source(destination).dump(self.config_dump())
        return self

    def config_dump(self) -> dict[str, Any]:
        """Return a JSON-compatible dictionary representation of the configuration."""
        return self.model_dump(mode="json")


class Environment(BaseSettings):
    """Settings taken from `MELTREC_*` environment variables."""

    model_config: ClassVar[SettingsConfigDict] = SettingsConfigDict(
        env_prefix="MELTREC_",
        extra="ignore",
    )

    workdir: Path = Path("workdir")


class EncoderConfig(BaseConfig):
    """Shape of the causal self-attention encoder and the embedding generators."""

    d: int = Field(default=50, ge=1)
    max_len: int = Field(default=50, ge=1)
    n_blocks: int = Field(default=1, ge=1)
    n_heads: int = Field(default=2, ge=1)
    dropout_rate: float = Field(default=0.2, ge=0.0, lt=1.0)
    generator_layers: int = Field(default=1, ge=1, le=4)
    dtype: Literal["float32", "float64"] = "float32"
    n_items: int | None = Field(default=None, ge=1)

    @model_validator(mode="after")
    def _check_heads(self) -> Self:
        if self.d % self.n_heads:
            msg = f"d={self.d} is not divisible by n_heads={self.n_heads}"
            raise ConfigError(msg)
        return self

    @property
    def pad_id(self) -> int:
        """Reserved item id used for padding; one past the last real item."""
        if self.n_items is None:
            msg = "EncoderConfig.n_items must be set before the pad id is known"
            raise ConfigError(msg)
        return self.n_items

    @property
    def torch_dtype(self) -> torch.dtype:
        """The torch dtype of all parameters."""
        return torch.float64 if self.dtype == "float64" else torch.float32


class TrainConfig(BaseConfig):
    """Two-stage training: backbone pretraining, then the long-tail fine-tuning."""

    alpha: float = Field(default=0.2, gt=0.0, le=1.0)
    beta: float = Field(default=1.0, ge=0.0, le=1.0)
    gamma: float = Field(default=0.0, ge=0.0, le=1.0)
    lambda_u: float = Field(default=0.1, ge=0.0)
    lambda_i: float = Field(default=0.1, ge=0.0)
    e_max: int = Field(default=30, ge=1)
    pretrain_epochs: int = Field(default=20, ge=1)
    batch_size: int = Field(default=128, ge=1)
    learning_rate: float = Field(default=1e-3, gt=0.0)
    adam_beta1: float = Field(default=0.9, ge=0.0, lt=1.0)
    adam_beta2: float = Field(default=0.98, ge=0.0, lt=1.0)
    adam_eps: float = Field(default=1e-8, gt=0.0)
    seed: int = Field(default=0, ge=0, lt=2**64)
    include_reversed: bool = True
    min_count: int = Field(default=5, ge=1)
    iterate_core_filter: bool = True
    max_context_subsequences: int = Field(default=64, ge=1)
    user_branch: bool = True
    item_branch: bool = True
    mutual_enhancement: bool = True
    curriculum: bool = True
    enhance_head_item_inputs: bool = True
    warm_start_generators: bool = True
    warm_start_ridge: float = Field(default=1.0, gt=0.0)


class EvalConfig(BaseConfig):
    """Sampled-negative ranking evaluation."""

    k: int = Field(default=10, ge=1)
    n_negatives: int = Field(default=100, ge=1)
    seed: int = Field(default=0, ge=0, lt=2**64)
    target: Literal["validation", "test"] = "test"
    append_validation: bool = True


class SyntheticConfig(BaseConfig):
    """Long-tailed synthetic interaction log."""

    n_users: int = Field(default=2000, ge=1)
    n_items: int = Field(default=500, ge=1)
    zipf_exponent: float = Field(default=1.2, gt=0.0)
    user_activity_exponent: float = Field(default=2.0, gt=0.0)
    min_seq_len: int = Field(default=5, ge=5)
    mean_seq_len: float = Field(default=15.0, gt=0.0)
    n_clusters: int = Field(default=10, ge=1)
    cluster_affinity: float = Field(default=0.8, ge=0.0, le=1.0)
    seed: int = Field(default=0, ge=0, lt=2**64)

    @model_validator(mode="after")
    def _check_feasible(self) -> Self:
        self.check_feasible()
        return self

    def check_feasible(self) -> None:
        """Raise a `ConfigError` if no log can satisfy this configuration."""
        if self.min_seq_len > self.n_items:
            msg = (
                f"min_seq_len={self.min_seq_len} exceeds n_items={self.n_items}; "
                "sequences cannot avoid immediate repetition"
            )
            raise ConfigError(msg)
        if self.n_clusters > self.n_items:
            msg = f"n_clusters={self.n_clusters} exceeds n_items={self.n_items}"
            raise ConfigError(msg)
        if self.n_users * self.min_seq_len < 5 * self.n_items:
            msg = (
                f"{self.n_users} users of length >= {self.min_seq_len} cannot give "
                f"each of {self.n_items} items 5 interactions"
            )
            raise ConfigError(msg)


def _default_workdir() -> Path:
    return Environment().workdir


class RunConfig(BaseConfig):
    """Everything one pipeline run needs, stored as `config.json` in the workdir."""

    schema_version: Literal[1]
    data_in: Path | None = None
    workdir: Path = Field(default_factory=_default_workdir)
    encoder: EncoderConfig = Field(default_factory=EncoderConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    evaluation: EvalConfig = Field(default_factory=EvalConfig)
    synthetic: SyntheticConfig = Field(default_factory=SyntheticConfig)
    grid: dict[str, list[Any]] = Field(default_factory=dict)

    @model_validator(mode="before")
    @classmethod
    def _check_schema_version(cls, data: Any) -> Any:
        if isinstance(data, dict) and data.get("schema_version") != SCHEMA_VERSION:
            msg = (
                f"Unsupported schema_version {data.get('schema_version')!r}; "
                f"expected {SCHEMA_VERSION}"
            )
            raise ConfigError(msg)
        return data

    @model_validator(mode="after")
    def _check_grid(self) -> Self:
        for route in self.grid:
            section, _, name = route.partition(".")
            owner = getattr(self, section, None)
            if not isinstance(owner, BaseConfig) or name not in type(owner).model_fields:
                msg = f"Grid route {route!r} does not name a configuration field"
                raise ConfigError(msg)
        return self

    def expand_grid(self) -> Iterator[RunConfig]:
        """Yield one validated configuration per combination of grid values."""
        routes = list(self.grid)
        for values in itertools.product(*(self.grid[route] for route in routes)):
            data = self.config_dump()
            data["grid"] = {}
            for route, value in zip(routes, values):
                section, _, name = route.partition(".")
                data[section][name] = value
            yield type(self).config_validate(data)
