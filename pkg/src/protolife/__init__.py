"""Deterministic simulator of evolving protozoa with GRN-driven surface attachments."""

from .config import ConfigError, RngStream, SimConfig, dump_config, fork_stream, load_config
from .engine import StatsRow, World

__all__ = ["ConfigError", "RngStream", "SimConfig", "StatsRow", "World", "dump_config",
           "fork_stream", "load_config"]
__version__ = "0.1.0"
