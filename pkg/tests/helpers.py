"""Shared builders and brute-force oracles for the test suite."""

from fractions import Fraction
import random

from aknsd.matrices import SmallMatrix
from aknsd.series import MatSeries, series_mul

RAT = "rational"


def mat(rows, mode=RAT):
    return SmallMatrix.from_rows(rows, mode)


def rand_fraction(rng, num=3, den=(1, 2, 3)):
    return Fraction(rng.randint(-num, num), rng.choice(den))


def rand_matrix(rng, m, mode=RAT):
    return SmallMatrix.from_rows(
        [[rand_fraction(rng) for _ in range(m)] for _ in range(m)], mode
    )


def rand_series(rng, m, lo, hi, valid_lo=None, mode=RAT):
    coeffs = {d: rand_matrix(rng, m, mode) for d in range(lo, hi + 1)}
    return MatSeries.from_coeffs(
        coeffs, m, mode, lo=lo, hi=hi,
        valid_lo=valid_lo, exact_below=valid_lo is None,
    )


def extended_band_product(a, b, extra=4):
    """Oracle for product validity: recompute with wider bands, compare."""
    aa = _extend(a, extra)
    bb = _extend(b, extra)
    return series_mul(aa, bb)


def _extend(s, extra):
    # widen the stored band downwards with fresh junk below valid_lo so the
    # recomputation exercises exactly the degrees the original could not see
    rng = random.Random(12345)
    coeffs = {}
    for d in range(s.lo - extra, s.hi + 1):
        if d >= s.lo:
            coeffs[d] = s.coeffs[d - s.lo]
        else:
            coeffs[d] = rand_matrix(rng, s.m, s.mode)
    return MatSeries.from_coeffs(
        coeffs, s.m, s.mode, lo=s.lo - extra, hi=s.hi,
        valid_lo=s.lo - extra, exact_below=True,
    )
