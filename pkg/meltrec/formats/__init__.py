"""`meltrec.formats`: Data formats for configuration and artifact files."""

from __future__ import annotations

from . import base, std_json, toml, yaml
from .base import *  # noqa: F403
from .std_json import *  # noqa: F403
from .toml import *  # noqa: F403
from .yaml import *  # noqa: F403

__all__ = base.__all__ + std_json.__all__ + toml.__all__ + yaml.__all__
