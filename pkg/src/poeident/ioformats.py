"""Shared serialization helpers: exact-rational number strings and CSV framing.

Rationals travel as "p/q" strings so that JSON round trips are exact; floats
travel as plain JSON numbers (repr round trips exactly in Python 3).
"""

from __future__ import annotations

from fractions import Fraction


def format_number(value) -> object:
    """Encode a number for JSON: Fractions/ints as "p/q" strings, floats as-is."""
    if isinstance(value, Fraction):
        return f"{value.numerator}/{value.denominator}"
    if isinstance(value, int):
        return f"{value}/1"
    return float(value)


def parse_number(raw) -> Fraction | float:
    """Decode a JSON number: "p/q" strings become Fractions, numbers floats."""
    if isinstance(raw, str):
        return Fraction(raw)
    if isinstance(raw, bool) or raw is None:
        raise ValueError(f"not a number: {raw!r}")
    if isinstance(raw, int):
        return Fraction(raw)
    return float(raw)


def number_to_cell(value) -> str:
    """Render a number as a CSV cell (exact for rationals)."""
    if isinstance(value, Fraction):
        return f"{value.numerator}/{value.denominator}"
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


def cell_to_number(cell: str) -> Fraction | float:
    cell = cell.strip()
    if "/" in cell:
        return Fraction(cell)
    try:
        return Fraction(int(cell))
    except ValueError:
        return float(cell)
