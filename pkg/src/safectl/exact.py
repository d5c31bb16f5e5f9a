"""Exact sign decisions for sums of products of binary floats.

Every float is a dyadic rational, so a polynomial predicate over float inputs
has an exact truth value. Boundary-biased sampling puts many states within a
few ulps of a safety boundary, where plain float evaluation of e.g.
``v*v - 2*a*gap`` is dominated by rounding. The helpers here decide the sign of
``sum(prod(factors))`` exactly:

* :func:`exact_sign_scalar` uses :class:`fractions.Fraction` (slow, obviously
  correct);
* :func:`exact_sign` is a numpy version built on error-free transformations
  (Dekker/Knuth two-product and two-sum) with a Fraction fallback for the rare
  elements whose sign cannot be certified in double-double.

Products may have any number of factors (cost doubles per factor). Factors
of 2 or -1 are exact in binary floating point and may be folded into any
factor.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence

import numpy as np

_SPLITTER = 134217729.0  # 2**27 + 1
_PASSES = 3
_MARGIN = 1.0 + 1e-12
_TINY = 2.0 ** -80
_HUGE = 2.0 ** 80


def to_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    return Fraction(float(x))


def exact_sign_scalar(products: Sequence[Sequence[float]]) -> int:
    total = Fraction(0)
    for factors in products:
        term = Fraction(1)
        for f in factors:
            term *= to_fraction(f)
        total += term
    return (total > 0) - (total < 0)


def two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def _split(a):
    c = _SPLITTER * a
    hi = c - (c - a)
    return hi, a - hi


def two_prod(a, b):
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


def _expand(factors) -> list:
    # a product of k floats is the exact sum of at most 2**(k-1) floats
    terms = [np.asarray(factors[0], dtype=float)]
    for f in factors[1:]:
        nxt = []
        for t in terms:
            nxt.extend(two_prod(t, f))
        terms = nxt
    return terms


def exact_sign(products: Sequence[Sequence]) -> np.ndarray:
    """Vectorised exact sign of ``sum(prod(f) for f in products)``.

    Factors may be arrays or scalars; they are broadcast together. Returns an
    int8 array of -1/0/+1.
    """
    if all(np.ndim(f) == 0 for factors in products for f in factors):
        return np.int8(exact_sign_scalar(products))
    with np.errstate(over="ignore", invalid="ignore"):
        terms = []
        for factors in products:
            terms.extend(_expand(factors))
        stacked = np.array(np.broadcast_arrays(*terms), dtype=float)
        n = stacked.shape[0]
        for _ in range(_PASSES):
            for i in range(1, n):
                stacked[i], stacked[i - 1] = two_sum(stacked[i], stacked[i - 1])
        top = stacked[n - 1]
        rest = np.abs(stacked[: n - 1]).sum(axis=0) if n > 1 else np.zeros_like(top)
        sign = np.sign(top).astype(np.int8)
        certain = (np.abs(top) > rest * _MARGIN) | ((top == 0) & (rest == 0))
        certain &= np.isfinite(top) & np.isfinite(rest)
        # error-free transforms assume no underflow or overflow in the splits
        for factors in products:
            for f in factors:
                mag = np.abs(np.asarray(f, dtype=float))
                certain &= (mag == 0) | ((mag > _TINY) & (mag < _HUGE))
    if not certain.all():
        bcast = [np.broadcast_to(np.asarray(f, dtype=float), top.shape)
                 for factors in products for f in factors]
        shapes = [len(factors) for factors in products]
        for idx in zip(*np.nonzero(~certain)):
            flat = [b[idx] for b in bcast]
            grouped, pos = [], 0
            for k in shapes:
                grouped.append(flat[pos:pos + k])
                pos += k
            sign[idx] = exact_sign_scalar(grouped)
    return sign
