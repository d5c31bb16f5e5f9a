"""Helpers that let one formula serve floats, Fractions and numpy arrays."""

from __future__ import annotations

import numpy as np


def is_array(*values) -> bool:
    return any(isinstance(v, np.ndarray) for v in values)


def select(cond, when_true, when_false):
    """Piecewise choice: ``if cond`` for scalars, ``np.where`` for arrays.

    The branches are zero-argument callables. For arrays both are evaluated
    over every element (with float warnings silenced) and the result masked,
    so branch formulas may divide by zero where they are not selected.
    """
    if isinstance(cond, np.ndarray):
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            return np.where(cond, when_true(), when_false())
    return when_true() if cond else when_false()


def either(a, b):
    if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
        return np.logical_or(a, b)
    return bool(a) or bool(b)


def both(a, b):
    if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
        return np.logical_and(a, b)
    return bool(a) and bool(b)
