"""Rounding helpers shared by the specs, the SE width rule and search-space scaling."""

import math


def round_to_multiple(x: float, m: int = 8) -> int:
    """Nearest multiple of ``m``; exact ties round up."""
    return int(math.floor(x / m + 0.5)) * m


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))
