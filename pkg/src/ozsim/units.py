"""Fixed-point units used on the ledger.

Token amounts are integer micro-OZ (1 OZ = 1_000_000 micro-OZ) and prices are
integer micro-USD per OZ.  All balance arithmetic is exact; floats only appear
in rate/threshold parameters.
"""

from __future__ import annotations

MICRO = 1_000_000


def to_micro(value: float | int) -> int:
    """Convert an OZ (or USD) quantity to integer micro units."""
    return round(value * MICRO)


def from_micro(value: int) -> float:
    return value / MICRO
