"""Truncated matrix-valued Laurent series in the spectral parameter z.

A :class:`MatSeries` stores one :class:`SmallMatrix` coefficient per degree in
the band ``[lo, hi]``.  Degrees above ``hi`` are exactly zero (the band is
never truncated from above).  Below the band there are two situations, and
telling them apart is what makes order-by-order verification claims sound:

* ``exact_below=True``: degrees below ``lo`` are exactly zero too (the object
  is a finite, fully-known Laurent polynomial, e.g. ``z A - U`` or a basis
  projector).
* ``exact_below=False``: degrees below ``valid_lo`` have been dropped by a
  truncating operation and are unknown; reading them is an error.

Every arithmetic result carries a freshly computed ``valid_lo``: sums take the
worse of the inputs, a Cauchy product of ``a`` and ``b`` is exact for degrees
``>= max(valid_lo_a + hi_b, valid_lo_b + hi_a)`` (an unknown coefficient of
one factor first pollutes the product when paired with the top coefficient of
the other), and fully-known factors never limit depth at all.  Validity is
per-object metadata rather than a global truncation depth because products of
series with different top degrees lose depth at different rates.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import scalars
from .errors import DimensionError, SingularError, ValidityError
from .matrices import SmallMatrix


@dataclass(frozen=True)
class MatSeries:
    """Laurent series with SmallMatrix coefficients on the band [lo, hi]."""

    m: int
    mode: str
    lo: int
    hi: int
    coeffs: tuple  # one SmallMatrix per degree lo..hi
    valid_lo: int  # lowest degree guaranteed exact; hi+1 means nothing valid
    exact_below: bool = False  # True: degrees < lo are exactly zero

    def __post_init__(self):
        scalars.check_mode(self.mode)
        if self.lo > self.hi:
            raise DimensionError(f"empty band [{self.lo}, {self.hi}]")
        if len(self.coeffs) != self.hi - self.lo + 1:
            raise DimensionError("coefficient count does not match band")
        if not (self.lo <= self.valid_lo <= self.hi + 1):
            raise ValidityError(
                f"valid_lo {self.valid_lo} outside [{self.lo}, {self.hi + 1}]"
            )
        if self.exact_below and self.valid_lo != self.lo:
            raise ValidityError("exact_below requires valid_lo == lo")
        for c in self.coeffs:
            if c.m != self.m:
                raise DimensionError("coefficient dimension mismatch")
            scalars.join_modes(c.mode, self.mode)

    # -- constructors --------------------------------------------------------

    @staticmethod
    def from_coeffs(entries: dict, m: int, mode: str, *, lo=None, hi=None,
                    valid_lo=None, exact_below=True) -> "MatSeries":
        """Build a series from a degree -> SmallMatrix mapping.

        By default the object is treated as fully known (finite Laurent
        polynomial): absent degrees inside the band are zero and everything
        below the band is exactly zero.
        """
        degrees = sorted(entries)
        band_lo = lo if lo is not None else (degrees[0] if degrees else 0)
        band_hi = hi if hi is not None else (degrees[-1] if degrees else 0)
        z = SmallMatrix.zero(m, mode)
        coeffs = tuple(entries.get(d, z) for d in range(band_lo, band_hi + 1))
        vlo = band_lo if valid_lo is None else valid_lo
        return MatSeries(m, mode, band_lo, band_hi, coeffs, vlo,
                         exact_below and vlo == band_lo)

    @staticmethod
    def zero(m: int, mode: str, lo: int = 0, hi: int = 0) -> "MatSeries":
        z = SmallMatrix.zero(m, mode)
        return MatSeries(m, mode, lo, hi, tuple(z for _ in range(hi - lo + 1)),
                         lo, True)

    @staticmethod
    def constant(mat: SmallMatrix) -> "MatSeries":
        """Promote a matrix to the exact degree-0 series."""
        return MatSeries(mat.m, mat.mode, 0, 0, (mat,), 0, True)

    @staticmethod
    def monomial(mat: SmallMatrix, degree: int) -> "MatSeries":
        return MatSeries(mat.m, mat.mode, degree, degree, (mat,), degree, True)

    # -- access ---------------------------------------------------------------

    def _effective_valid_lo(self):
        return None if self.exact_below else self.valid_lo  # None = -infinity

    def valid_at(self, degree: int) -> bool:
        if degree > self.hi:
            return True
        if self.exact_below:
            return True
        return degree >= self.valid_lo

    def get(self, degree: int) -> SmallMatrix:
        """Coefficient at ``degree``; zero outside the band, error below validity."""
        if not self.valid_at(degree):
            raise ValidityError(
                f"degree {degree} below validity bound {self.valid_lo}"
            )
        if degree > self.hi or degree < self.lo:
            return SmallMatrix.zero(self.m, self.mode)
        return self.coeffs[degree - self.lo]

    def valid_degrees(self):
        """Degrees in the stored band that carry guaranteed-exact coefficients."""
        return range(max(self.lo, self.valid_lo), self.hi + 1)

    def _compat(self, other: "MatSeries") -> None:
        if self.m != other.m:
            raise DimensionError(f"dimension mismatch: {self.m} vs {other.m}")
        scalars.join_modes(self.mode, other.mode)

    # -- linear operations -----------------------------------------------------

    def __add__(self, other: "MatSeries") -> "MatSeries":
        return _combine(self, other, 1)

    def __sub__(self, other: "MatSeries") -> "MatSeries":
        return _combine(self, other, -1)

    def __neg__(self) -> "MatSeries":
        return MatSeries(self.m, self.mode, self.lo, self.hi,
                         tuple(-c for c in self.coeffs),
                         self.valid_lo, self.exact_below)

    def scale(self, s) -> "MatSeries":
        """Multiply by a plain scalar (for ScalarSeries factors see scale_series)."""
        s = scalars.as_scalar(s, self.mode)
        return MatSeries(self.m, self.mode, self.lo, self.hi,
                         tuple(c.scale(s) for c in self.coeffs),
                         self.valid_lo, self.exact_below)

    def shift_degree(self, j: int) -> "MatSeries":
        """Multiply by the monomial z**j."""
        return MatSeries(self.m, self.mode, self.lo + j, self.hi + j,
                         self.coeffs, self.valid_lo + j, self.exact_below)

    def left_mul_mat(self, mat: SmallMatrix) -> "MatSeries":
        return MatSeries(self.m, self.mode, self.lo, self.hi,
                         tuple(mat @ c for c in self.coeffs),
                         self.valid_lo, self.exact_below)

    def right_mul_mat(self, mat: SmallMatrix) -> "MatSeries":
        return MatSeries(self.m, self.mode, self.lo, self.hi,
                         tuple(c @ mat for c in self.coeffs),
                         self.valid_lo, self.exact_below)

    def transpose(self) -> "MatSeries":
        return MatSeries(self.m, self.mode, self.lo, self.hi,
                         tuple(c.transpose() for c in self.coeffs),
                         self.valid_lo, self.exact_below)

    # -- predicates / norms ------------------------------------------------------

    def max_abs(self):
        """Max absolute entry over guaranteed-valid degrees."""
        best = scalars.zero(self.mode)
        for d in self.valid_degrees():
            v = self.coeffs[d - self.lo].max_abs()
            if v > best:
                best = v
        return best

    def is_zero(self) -> bool:
        return all(self.coeffs[d - self.lo].is_zero() for d in self.valid_degrees())

    def trim_top(self) -> "MatSeries":
        """Drop exactly-zero top coefficients (never past valid_lo or lo)."""
        hi = self.hi
        floor = max(self.lo, self.valid_lo)
        while hi > floor and self.coeffs[hi - self.lo].is_zero():
            hi -= 1
        if hi == self.hi:
            return self
        return MatSeries(self.m, self.mode, self.lo, hi,
                         self.coeffs[: hi - self.lo + 1],
                         min(self.valid_lo, hi + 1), self.exact_below)


def _combine(a: MatSeries, b: MatSeries, sign: int) -> MatSeries:
    a._compat(b)
    lo = min(a.lo, b.lo)
    hi = max(a.hi, b.hi)
    ea, eb = a._effective_valid_lo(), b._effective_valid_lo()
    if ea is None and eb is None:
        vlo, exact = lo, True
    else:
        vlo = max(v for v in (ea, eb) if v is not None)
        vlo = max(vlo, lo)
        exact = False
    coeffs = []
    for d in range(max(lo, vlo) if not exact else lo, hi + 1):
        ca = a.get(d) if a.valid_at(d) else SmallMatrix.zero(a.m, a.mode)
        cb = b.get(d) if b.valid_at(d) else SmallMatrix.zero(a.m, a.mode)
        coeffs.append(ca + cb if sign > 0 else ca - cb)
    band_lo = lo if exact else max(lo, vlo)
    return MatSeries(a.m, a.mode, band_lo, hi, tuple(coeffs),
                     band_lo if exact else vlo, exact)


def series_arith(a: MatSeries, b: MatSeries, op: str = "add", s=None) -> MatSeries:
    """Degreewise combination a op (s * b); s may be a scalar or ScalarSeries."""
    if s is not None:
        b = scale_series(b, s) if isinstance(s, MatSeries) else b.scale(s)
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    raise ValueError(f"unknown op {op!r}")


def series_mul(a: MatSeries, b: MatSeries) -> MatSeries:
    """Cauchy product with sound validity bookkeeping."""
    a._compat(b)
    hi = a.hi + b.hi
    lo_true = a.lo + b.lo
    ea, eb = a._effective_valid_lo(), b._effective_valid_lo()
    cands = []
    if ea is not None:
        cands.append(ea + b.hi)
    if eb is not None:
        cands.append(eb + a.hi)
    exact = not cands
    vlo = lo_true if exact else max(max(cands), lo_true)
    band_lo = lo_true if exact else vlo
    coeffs = []
    for d in range(band_lo, hi + 1):
        acc = SmallMatrix.zero(a.m, a.mode)
        i_lo = max(a.lo, d - b.hi)
        i_hi = min(a.hi, d - b.lo)
        for i in range(i_lo, i_hi + 1):
            ca = a.coeffs[i - a.lo]
            cb = b.coeffs[d - i - b.lo]
            if not ca.is_zero() and not cb.is_zero():
                acc = acc + (ca @ cb)
        coeffs.append(acc)
    return MatSeries(a.m, a.mode, band_lo, hi, tuple(coeffs),
                     band_lo if exact else vlo, exact)


def scale_series(a: MatSeries, c: MatSeries) -> MatSeries:
    """Scale a (matrix) series by a scalar series (m == 1), via the Cauchy product."""
    if c.m != 1:
        raise DimensionError("scalar-series factor must have m == 1")
    scalars.join_modes(a.mode, c.mode)
    lifted = MatSeries(
        a.m, a.mode, c.lo, c.hi,
        tuple(SmallMatrix.identity(a.m, a.mode).scale(mat.get(1, 1)) for mat in c.coeffs),
        c.valid_lo, c.exact_below,
    )
    return series_mul(lifted, a)


def series_inverse(a: MatSeries, depth: int) -> MatSeries:
    """Multiplicative inverse through ``depth`` orders below the top degree.

    Requires the (trimmed) top coefficient to be invertible.  The result b has
    band ``[-a.hi - depth, -a.hi]`` and satisfies a*b = b*a = I + (terms below
    the shared validity band).
    """
    if depth < 0:
        raise ValidityError("depth must be >= 0")
    a = a.trim_top()
    avail = None if a.exact_below else a.hi - a.valid_lo
    if avail is not None and depth > avail:
        raise ValidityError(
            f"requested depth {depth} exceeds input validity depth {avail}"
        )
    try:
        top_inv = a.coeffs[a.hi - a.lo].inverse()
    except SingularError:
        raise SingularError("top coefficient of series is singular") from None
    h = a.hi
    out = {0: top_inv}
    for j in range(1, depth + 1):
        acc = SmallMatrix.zero(a.m, a.mode)
        for i in range(1, j + 1):
            ai = a.get(h - i) if a.valid_at(h - i) else None
            if ai is None or ai.is_zero():
                continue
            acc = acc + (ai @ out[j - i])
        out[j] = -(top_inv @ acc)
    coeffs = tuple(out[j] for j in range(depth, -1, -1))
    return MatSeries(a.m, a.mode, -h - depth, -h, coeffs, -h - depth, False)


def series_project(a: MatSeries, part: str):
    """Split into non-negative / strictly-negative degrees, or take res_z.

    ``plus``    -> degrees >= 0 unchanged (an exact polynomial);
    ``minus``   -> a - plus(a), carrying a's validity below zero;
    ``residue`` -> the coefficient of z**-1 as a SmallMatrix.
    """
    if part == "plus":
        if not a.valid_at(0):
            raise ValidityError("plus-projection needs degree 0 inside the valid band")
        hi = max(a.hi, 0)
        return MatSeries.from_coeffs(
            {d: a.get(d) for d in range(0, hi + 1)}, a.m, a.mode, lo=0, hi=hi
        )
    if part == "minus":
        if not a.valid_at(-1):
            raise ValidityError("minus-projection needs degree -1 inside the valid band")
        lo = a.lo if a.exact_below else max(a.lo, a.valid_lo)
        if lo > -1:
            return MatSeries.zero(a.m, a.mode, -1, -1)
        return MatSeries(a.m, a.mode, lo, -1,
                         tuple(a.coeffs[d - a.lo] for d in range(lo, 0)),
                         lo if a.exact_below else a.valid_lo, a.exact_below)
    if part == "residue":
        if not a.valid_at(-1):
            raise ValidityError("residue requested but degree -1 is not valid")
        return a.get(-1)
    raise ValueError(f"unknown projection {part!r}")


def series_equal(a: MatSeries, b: MatSeries) -> bool:
    """Equality on the intersection of guaranteed-valid degrees (exact modes)."""
    lo = max(
        a.lo if a.exact_below else a.valid_lo,
        b.lo if b.exact_below else b.valid_lo,
    )
    hi = max(a.hi, b.hi)
    return all((a.get(d) - b.get(d)).is_zero() for d in range(lo, hi + 1))


# -- serialization ---------------------------------------------------------------


def series_to_json(a: MatSeries) -> dict:
    return {
        "m": a.m,
        "mode": a.mode,
        "lo": a.lo,
        "hi": a.hi,
        "valid_lo": a.valid_lo,
        "exact_below": a.exact_below,
        "coeffs": [
            [scalars.format_scalar(x) for row in c.rows for x in row]
            for c in a.coeffs
        ],
    }


def series_from_json(doc: dict) -> MatSeries:
    m = doc["m"]
    mode = doc["mode"]
    coeffs = []
    for flat in doc["coeffs"]:
        vals = [scalars.parse_scalar(x, mode) for x in flat]
        rows = tuple(tuple(vals[i * m + j] for j in range(m)) for i in range(m))
        coeffs.append(SmallMatrix(m, mode, rows))
    return MatSeries(m, mode, doc["lo"], doc["hi"], tuple(coeffs),
                     doc["valid_lo"], doc.get("exact_below", False))
