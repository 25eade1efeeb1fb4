"""SFMGNet pedestrian workbench."""

from ._core import *  # noqa: F401,F403
from ._core import (  # noqa: F401
    DataError,
    InvariantError,
    RunConfig,
    SfmgParams,
    UsageError,
)

__version__ = "0.1.0"
