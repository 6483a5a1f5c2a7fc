"""Slot-based transformer scoring network for visual matrix reasoning."""

from .config import TrainConfig, load_config, preset
from .model import STSN

__all__ = ["STSN", "TrainConfig", "load_config", "preset"]
__version__ = "0.1.0"
