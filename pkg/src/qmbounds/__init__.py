"""Majorization bounds and uncertainty regions for conditioned measurement statistics."""

from . import cip, cli, majorization, measures, quantum, regions, sdp

__all__ = ["cip", "cli", "majorization", "measures", "quantum", "regions", "sdp"]
__version__ = "0.1.0"
