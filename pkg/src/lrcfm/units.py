"""Parsing of quantities with explicit unit suffixes.

All internal computation is in SI (meters, watts, seconds, hertz).
External inputs (config files, CLI flags) carry explicit unit suffixes
so that e.g. "0.9 mm" cannot silently be read as 0.9 m.
"""

from __future__ import annotations


class UnitError(ValueError):
    """A quantity string could not be parsed or has the wrong dimension."""


_LENGTH = {"m": 1.0, "cm": 1e-2, "mm": 1e-3, "um": 1e-6, "µm": 1e-6, "nm": 1e-9}
_POWER = {"W": 1.0, "mW": 1e-3, "uW": 1e-6, "µW": 1e-6}
_TIME = {"s": 1.0, "ms": 1e-3, "us": 1e-6, "µs": 1e-6, "ns": 1e-9}

_BY_KIND = {"length": _LENGTH, "power": _POWER, "time": _TIME}


def parse_quantity(text: str, kind: str) -> float:
    """Parse a string like "532 nm" or "10 mW" into an SI float.

    `kind` is one of "length", "power", "time". The unit suffix is
    mandatory; a bare number raises UnitError.
    """
    units = _BY_KIND.get(kind)
    if units is None:
        raise UnitError(f"unknown quantity kind {kind!r}")
    parts = text.strip().split()
    if len(parts) == 2:
        number, suffix = parts
    elif len(parts) == 1:
        # allow "532nm" with the suffix glued on
        number = parts[0].rstrip("".join(set("".join(units))))
        suffix = parts[0][len(number):]
    else:
        raise UnitError(f"cannot parse quantity {text!r}")
    if suffix not in units:
        raise UnitError(
            f"quantity {text!r}: expected a {kind} unit "
            f"({', '.join(sorted(units))})"
        )
    try:
        value = float(number)
    except ValueError as exc:
        raise UnitError(f"cannot parse number in {text!r}") from exc
    return value * units[suffix]


def parse_number(text: str) -> float:
    """Parse a dimensionless value; rejects anything with a unit suffix."""
    try:
        return float(text.strip())
    except ValueError as exc:
        raise UnitError(f"expected a plain number, got {text!r}") from exc
