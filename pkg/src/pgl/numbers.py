"""Parsing of numeric command-line values: decimals, fractions and sqrt()."""

from __future__ import annotations

import math
import re
from fractions import Fraction

_SQRT = re.compile(r"^(-?)sqrt\((.+)\)$")


def parse_real(text: str) -> float:
    """Parse ``"0.25"``, ``"1/64"``, ``"-3/4"`` or ``"sqrt(1/2)"``."""
    s = text.strip().replace(" ", "")
    m = _SQRT.match(s)
    if m:
        inner = float(Fraction(m.group(2)))
        if inner < 0:
            raise ValueError(f"negative square root in {text!r}")
        return -math.sqrt(inner) if m.group(1) else math.sqrt(inner)
    try:
        return float(Fraction(s))
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"not a number: {text!r}") from exc


def parse_complex(text: str) -> complex:
    """Real forms of ``parse_real`` or a Python complex literal such as ``0.5+0.5j``."""
    try:
        return complex(parse_real(text))
    except ValueError:
        pass
    try:
        return complex(text.strip().replace(" ", ""))
    except ValueError as exc:
        raise ValueError(f"not a number: {text!r}") from exc
