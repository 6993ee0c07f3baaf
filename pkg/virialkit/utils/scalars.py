from __future__ import annotations

import cmath
import math
from fractions import Fraction
from typing import Literal, Union

Scalar = Union[int, Fraction, float, complex]
NumericMode = Literal["rational", "float"]


class HardCore:
    """Tagged +infinity for pair-potential entries.

    Kept distinct from float('inf') so that the Mayer function of a hard
    core is the exact integer -1 in every scalar mode.
    """

    _instance: "HardCore | None" = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "HARD_CORE"

    def __float__(self) -> float:
        return math.inf

    def __eq__(self, other) -> bool:
        return other is self or (isinstance(other, float) and other == math.inf)

    def __hash__(self) -> int:
        return hash(math.inf)

    def __gt__(self, other) -> bool:
        return other is not self

    def __ge__(self, other) -> bool:
        return True

    def __lt__(self, other) -> bool:
        return False

    def __le__(self, other) -> bool:
        return other is self


HARD_CORE = HardCore()

def is_hard_core(v) -> bool:
    if v is HARD_CORE:
        return True
    return isinstance(v, float) and v == math.inf


def parse_scalar(raw, mode: NumericMode = "float"):
    """Parse a JSON value (number or string such as '1/3', 'inf') into a scalar."""
    if isinstance(raw, str):
        text = raw.strip().lower()
        if text in ("inf", "+inf", "infinity", "hard_core"):
            return HARD_CORE
        if mode == "rational":
            return Fraction(text)
        if "/" in text:
            return float(Fraction(text))
        return complex(text) if "j" in text else float(text)
    if isinstance(raw, float) and raw == math.inf:
        return HARD_CORE
    if mode == "rational":
        if isinstance(raw, (complex,)):
            raise TypeError("complex values are not allowed in rational mode")
        return Fraction(raw)
    if isinstance(raw, (int, Fraction)):
        return float(raw)
    return raw


def div(x, n: int):
    """x / n, exact when x is an int or Fraction."""
    if isinstance(x, int):
        return Fraction(x, n)
    return x / n


def exp_scalar(x):
    if isinstance(x, complex):
        return cmath.exp(x)
    return math.exp(x)


def log_scalar(x):
    if isinstance(x, complex) or x < 0:
        return cmath.log(x)
    return math.log(x)


def to_float(x) -> float:
    if x is HARD_CORE:
        return math.inf
    return float(x)


def magnitude(x):
    """|x| that keeps Fractions exact."""
    if isinstance(x, complex):
        return abs(x)
    return -x if x < 0 else x


def format_scalar(x) -> str:
    if x is HARD_CORE:
        return "inf"
    if isinstance(x, Fraction):
        return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, complex):
        if x.imag == 0:
            return repr(x.real)
        return repr(x)
    return repr(x)
