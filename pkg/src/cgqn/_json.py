"""Scalar/array <-> JSON helpers shared by the file formats."""

from fractions import Fraction

import numpy as np


def encode(value):
    """Fractions become ``"num/den"`` strings; floats stay floats."""
    if isinstance(value, Fraction):
        return f"{value.numerator}/{value.denominator}"
    if isinstance(value, np.ndarray):
        return [encode(v) for v in value]
    if isinstance(value, (list, tuple)):
        return [encode(v) for v in value]
    if isinstance(value, dict):
        return {k: encode(v) for k, v in value.items()}
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def decode_scalar(value, exact: bool):
    if exact:
        if isinstance(value, float):
            return Fraction(value)
        return Fraction(str(value))
    if isinstance(value, str):
        return float(Fraction(value))
    return float(value)
