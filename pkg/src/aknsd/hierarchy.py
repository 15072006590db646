"""The discrete AKNS-D core: dressing, resolvents, projections, flows.

The Lax operator is ``L = Delta - z A + U`` with ``A`` a constant diagonal
matrix with distinct nonzero entries and ``U`` an off-diagonal potential of
compact support.  Everything below follows from two expanded operator
identities (see docs/derivations.md for the Leibniz steps):

* the dressing relation ``L w_hat = (Lambda w_hat)(Delta - z A)`` is, order by
  order in ``z**-k``::

      Delta w_k + U w_k = A w_{k+1} - (Lambda w_{k+1}) A,      w_0 = I,

  which per entry (i, j) is the two-point recursion
  ``a_i w(n) - a_j w(n+1) = rhs(n)``;

* the commutator of a multiplication operator ``P`` with ``L`` is itself a
  multiplication operator::

      [P, L]_D = -Delta P - z ((Lambda P) A - A P) + (Lambda P) U - U P.

Off-diagonal recursion entries are solved in the contracting direction
(forward from a zero left tail when ``|a_i| <= |a_j|``, else backward from a
zero right tail; exact ties go forward) and diagonal entries by discrete
integration from a zero left tail.  On a finite window this boundary policy
*is* the contract: the recursion is enforced at every stored transition, so
the dressing residual vanishes identically in rational mode, and the direct
resolvent recursion reuses the identical kernel so both constructions agree
entry for entry.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

from . import scalars
from .errors import ConsistencyError, InstanceError, ValidityError
from .lattice import LatticeFn, Window, delta_apply, shift_apply
from .matrices import SmallMatrix
from .series import MatSeries, series_inverse, series_mul, series_project


@dataclass(frozen=True)
class AknsData:
    """Diagonal part A = diag(a_1..a_m); entries pairwise distinct, nonzero."""

    m: int
    a: tuple
    mode: str = scalars.RATIONAL

    def __post_init__(self):
        if not (2 <= self.m <= 8):
            raise InstanceError(f"instance dimension {self.m} outside 2..8")
        if len(self.a) != self.m:
            raise InstanceError("need exactly m diagonal entries")
        if any(x == 0 for x in self.a):
            raise InstanceError("diagonal entries must be nonzero")
        if len({x for x in self.a}) != self.m:
            raise InstanceError("diagonal entries must be pairwise distinct")

    @property
    def matrix(self) -> SmallMatrix:
        return SmallMatrix.diag(self.a, self.mode)

    def projector(self, alpha: int) -> SmallMatrix:
        if not 1 <= alpha <= self.m:
            raise InstanceError(f"basis index {alpha} outside 1..{self.m}")
        return SmallMatrix.basis_projector(self.m, alpha, self.mode)

    def direction(self, i: int, j: int) -> str:
        """Recursion direction for the off-diagonal entry (i, j), 1-based."""
        if i == j:
            return "integrate"
        ai = scalars.scalar_abs(self.a[i - 1])
        aj = scalars.scalar_abs(self.a[j - 1])
        return "forward" if ai <= aj else "backward"

    def conventions(self) -> dict:
        return {
            "policy": "contracting",
            "tie_break": "forward",
            "diagonal": "zero-left-integration",
            "directions": {
                f"{i},{j}": self.direction(i, j)
                for i in range(1, self.m + 1)
                for j in range(1, self.m + 1)
                if i != j
            },
        }


def validate_potential(U: LatticeFn, *, require_zero_diagonal: bool = True) -> LatticeFn:
    """Check the potential invariants: zero tails, and zero diagonal entries.

    Evolved potentials are exempt from the diagonal check by the caller: the
    hierarchy flows of order k >= 1 rotate a pure-gauge diagonal component
    into U (see docs/derivations.md), so only *input* data is constrained.
    """
    if not U.left_tail.is_zero() or not U.right_tail.is_zero():
        raise InstanceError("potential must carry zero tails on both sides")
    if require_zero_diagonal:
        for n in U.sites():
            v = U.at(n)
            for i in range(v.m):
                if v.rows[i][i] != 0:
                    raise InstanceError(
                        f"potential has nonzero diagonal entry at site {n}"
                    )
    return U


def make_potential(window: Window, entries: dict, m: int,
                   mode: str = scalars.RATIONAL, step=None) -> LatticeFn:
    """Potential from a site -> SmallMatrix mapping; zero elsewhere."""
    zero = SmallMatrix.zero(m, mode)
    vals = [entries.get(n, zero) for n in range(window.stored_lo, window.stored_hi + 1)]
    return validate_potential(
        LatticeFn.from_values(window.stored_lo, vals, step=step, mode=mode)
    )


# -- shared recursion kernel ------------------------------------------------------


def solve_two_point(a_i, a_j, rhs, lo: int, hi: int, direction: str, mode: str):
    """Solve a_i w(n) - a_j w(n+1) = rhs(n) for n in [lo, hi-1] on [lo, hi].

    ``rhs`` maps transition sites to scalars; missing sites mean zero.  The
    chosen direction fixes the one free constant: zero at the starting edge.
    """
    z = scalars.zero(mode)
    w = {n: z for n in range(lo, hi + 1)}
    if direction == "forward":
        for n in range(lo, hi):
            w[n + 1] = (a_i * w[n] - rhs.get(n, z)) / a_j
    elif direction == "backward":
        for n in range(hi - 1, lo - 1, -1):
            w[n] = (a_j * w[n + 1] + rhs.get(n, z)) / a_i
    elif direction == "integrate":
        for n in range(lo, hi):
            w[n + 1] = w[n] - rhs.get(n, z) / a_i
    else:
        raise ValueError(f"unknown direction {direction!r}")
    return [w[n] for n in range(lo, hi + 1)]


def _solve_order(data: AknsData, rhs: LatticeFn, lo: int, hi: int) -> LatticeFn:
    """One recursion order: rhs is matrix-valued on [lo, hi-1]; result on [lo, hi]."""
    m = data.m
    mode = rhs.mode
    entries = {}
    for i in range(1, m + 1):
        for j in range(1, m + 1):
            comp = {n: rhs.at(n).get(i, j) for n in range(lo, hi)}
            entries[(i, j)] = solve_two_point(
                data.a[i - 1], data.a[j - 1], comp, lo, hi,
                data.direction(i, j), mode,
            )
    vals = []
    for idx, n in enumerate(range(lo, hi + 1)):
        rows = tuple(
            tuple(entries[(i, j)][idx] for j in range(1, m + 1))
            for i in range(1, m + 1)
        )
        vals.append(SmallMatrix(m, mode, rows))
    zero = SmallMatrix.zero(m, mode)
    right_tail = vals[-1].diagonal_part()
    return LatticeFn(lo, hi, tuple(vals), zero, right_tail, rhs.step, mode)


# -- dressing ----------------------------------------------------------------------


@dataclass(frozen=True)
class Dressing:
    """Solved dressing coefficients w_1..w_N plus the conventions that fixed them."""

    depth: int
    ws: tuple  # LatticeFn per order, index 0 <-> w_1
    conventions: dict = field(compare=False)


def solve_dressing(data: AknsData, U: LatticeFn, depth: int) -> Dressing:
    """Order-by-order solve of Delta w_k + U w_k = A w_{k+1} - (Lambda w_{k+1}) A."""
    if depth < 1:
        raise InstanceError("dressing depth must be >= 1")
    lo, hi = U.lo, U.hi
    mode = U.mode
    ident = SmallMatrix.identity(data.m, mode)
    w_prev = LatticeFn(lo, hi, tuple(ident for _ in range(hi - lo + 1)),
                       ident, ident, U.step, mode)
    ws = []
    for _ in range(depth):
        dw = delta_apply(w_prev, "forward", use_eps=True)
        rhs = dw + U.zip_with(w_prev, lambda u, w: u @ w).restrict(lo, hi - 1)
        w_next = _solve_order(data, rhs, lo, hi)
        ws.append(w_next)
        w_prev = w_next
    return Dressing(depth, tuple(ws), data.conventions())


# -- solved state --------------------------------------------------------------------


@dataclass
class HierarchyState:
    """A potential together with its solved dressing at a given depth."""

    data: AknsData
    U: LatticeFn
    window: Window
    depth: int
    dressing: Dressing
    times: dict = field(default_factory=dict)

    @property
    def mode(self) -> str:
        return self.U.mode

    @property
    def step(self):
        return self.U.eps()

    @staticmethod
    def solve(data: AknsData, U: LatticeFn, window: Window, depth: int,
              *, validate: bool = True) -> "HierarchyState":
        if depth > window.halo:
            raise InstanceError(
                f"depth {depth} exceeds window halo {window.halo}"
            )
        if validate:
            validate_potential(U)
        dressing = solve_dressing(data, U, depth)
        return HierarchyState(data, U, window, depth, dressing)

    @cached_property
    def hat(self) -> LatticeFn:
        """The dressing series I + sum_k w_k z^-k as a series-valued function."""
        mode = self.mode
        ident = SmallMatrix.identity(self.data.m, mode)
        n_orders = self.depth

        def site_series(n):
            coeffs = {0: ident}
            for k, w in enumerate(self.dressing.ws, start=1):
                coeffs[-k] = w.at(n)
            return MatSeries.from_coeffs(
                coeffs, self.data.m, mode, lo=-n_orders, hi=0,
                valid_lo=-n_orders, exact_below=False,
            )

        lo, hi = self.U.lo, self.U.hi
        vals = tuple(site_series(n) for n in range(lo, hi + 1))
        zero = MatSeries.zero(self.data.m, mode)
        return LatticeFn(lo, hi, vals, zero, zero, self.U.step, mode)

    @cached_property
    def hat_inverse(self) -> LatticeFn:
        return self.hat.map(lambda s: series_inverse(s, self.depth), map_tails=False)

    def resolvent(self, alpha: int):
        if not hasattr(self, "_resolvents"):
            self._resolvents = {}
        if alpha not in self._resolvents:
            self._resolvents[alpha] = resolvent_dressed(self, alpha)
        return self._resolvents[alpha]


def dressing_residual(state: HierarchyState):
    """Max-abs coefficient of Delta w_hat + U w_hat - z A w_hat + z (Lambda w_hat) A.

    This is the multiplication-operator part of the difference between the
    two sides of the dressing relation; it vanishes exactly in rational mode
    at every site where the recursion was enforced.
    """
    res = _dressing_defect(state)
    best = scalars.zero(state.mode)
    for n in res.sites():
        v = res.at(n).max_abs()
        if v > best:
            best = v
    return best


def _dressing_defect(state: HierarchyState) -> LatticeFn:
    a_mat = state.data.matrix
    hat = state.hat
    lam_hat = shift_apply(hat, 1)
    d_hat = delta_apply(hat, "forward", use_eps=True)
    u_term = state.U.zip_with(hat, lambda u, s: s.left_mul_mat(u))
    za_term = hat.map(lambda s: s.left_mul_mat(a_mat).shift_degree(1), map_tails=False)
    lam_term = lam_hat.map(lambda s: s.right_mul_mat(a_mat).shift_degree(1), map_tails=False)
    return (d_hat + u_term.restrict(d_hat.lo, d_hat.hi)) - \
        za_term.restrict(d_hat.lo, d_hat.hi) + lam_term


# -- resolvents ----------------------------------------------------------------------


@dataclass(frozen=True)
class Resolvent:
    """Series R with R_(0) = E_alpha satisfying [R, L]_D = 0 through its depth."""

    alpha: int
    series: LatticeFn  # MatSeries-valued, band [-depth, 0]
    depth: int


def resolvent_dressed(state: HierarchyState, alpha: int) -> Resolvent:
    """R_alpha = w_hat E_alpha w_hat^{-1}, computed sitewise."""
    e_alpha = MatSeries.constant(state.data.projector(alpha))
    vals = state.hat.zip_with(
        state.hat_inverse,
        lambda w, wi: series_mul(series_mul(w, e_alpha), wi),
    )
    return Resolvent(alpha, vals, state.depth)


def resolvent_direct(data: AknsData, U: LatticeFn, alpha: int, depth: int,
                     *, seed: SmallMatrix | None = None) -> Resolvent:
    """Order-by-order solve of Delta R_i - [R_i, U]_D + [R_{i+1}, A]_D = 0.

    Shares the recursion kernel, direction policy and zero integration
    constants with the dressing solver, so the result is comparable entry for
    entry with the dressed construction.
    """
    mode = U.mode
    if seed is None:
        seed = data.projector(alpha)
    else:
        for i in range(seed.m):
            for j in range(seed.m):
                if i != j and seed.rows[i][j] != 0:
                    raise InstanceError("zero-order resolvent term must be diagonal")
    lo, hi = U.lo, U.hi
    orders = [LatticeFn(lo, hi, tuple(seed for _ in range(hi - lo + 1)),
                        seed, seed, U.step, mode)]
    for _ in range(depth):
        r_prev = orders[-1]
        d_prev = delta_apply(r_prev, "forward", use_eps=True)
        lam_prev = shift_apply(r_prev, 1)
        comm_u = lam_prev.zip_with(U.restrict(lam_prev.lo, lam_prev.hi),
                                   lambda r, u: r @ u) - \
            U.zip_with(r_prev, lambda u, r: u @ r).restrict(lam_prev.lo, lam_prev.hi)
        rhs = d_prev - comm_u
        orders.append(_solve_order(data, rhs, lo, hi))

    def site_series(idx):
        coeffs = {-i: orders[i].values[idx] for i in range(depth + 1)}
        return MatSeries.from_coeffs(coeffs, data.m, mode, lo=-depth, hi=0,
                                     valid_lo=-depth, exact_below=False)

    vals = tuple(site_series(i) for i in range(hi - lo + 1))
    zero = MatSeries.zero(data.m, mode)
    series = LatticeFn(lo, hi, vals, zero, zero, U.step, mode)
    return Resolvent(alpha, series, depth)


# -- discrete commutators --------------------------------------------------------------


def commutator_d(P: LatticeFn, Q: LatticeFn) -> LatticeFn:
    """[P, Q]_D = (Lambda P) Q - Q P for series-valued lattice functions."""
    lam_p = shift_apply(P, 1)
    first = lam_p.zip_with(Q.restrict(lam_p.lo, lam_p.hi), series_mul)
    second = Q.zip_with(P, series_mul).restrict(lam_p.lo, lam_p.hi)
    return first - second


def commutator_with_l(P: LatticeFn, data: AknsData, U: LatticeFn) -> LatticeFn:
    """Multiplication-operator part of [P, L]_D for L = Delta - z A + U.

    Expanded form: -Delta P - z ((Lambda P) A - A P) + (Lambda P) U - U P,
    with the deformed difference when the lattice carries a step.
    """
    a_mat = data.matrix
    d_p = delta_apply(P, "forward", use_eps=True)
    lam_p = shift_apply(P, 1)
    lo, hi = lam_p.lo, lam_p.hi
    z_term = lam_p.map(lambda s: s.right_mul_mat(a_mat), map_tails=False) - \
        P.map(lambda s: s.left_mul_mat(a_mat), map_tails=False).restrict(lo, hi)
    z_term = z_term.map(lambda s: s.shift_degree(1), map_tails=False)
    u_term = lam_p.zip_with(U.restrict(lo, hi), lambda s, u: s.right_mul_mat(u)) - \
        P.zip_with(U, lambda s, u: s.left_mul_mat(u)).restrict(lo, hi)
    return u_term - d_p - z_term


# -- projections and the hierarchy flow field ----------------------------------------------


def projector_b(resolvent: Resolvent, k: int):
    """(B, Bbar): non-negative and strictly-negative parts of z^k R_alpha."""
    if not 0 <= k < resolvent.depth:
        raise ValidityError(
            f"flow order {k} outside the resolvent validity depth {resolvent.depth}"
        )
    shifted = resolvent.series.map(lambda s: s.shift_degree(k), map_tails=False)
    b = shifted.map(lambda s: series_project(s, "plus"), map_tails=False)
    bbar = shifted.map(lambda s: series_project(s, "minus"), map_tails=False)
    return b, bbar


def flow_field(state: HierarchyState, k: int, alpha: int, *, tol=0,
               on_diagonal: str = "raise") -> LatticeFn:
    """The (k, alpha) flow of the potential: degree-0 part of [B_{k alpha}, L]_D.

    Consistency checks: every coefficient at z-degree >= 1 must vanish (up to
    ``tol``; exactly in rational mode), which fails loudly for a wrong
    dressing or insufficient depth.  The degree-0 diagonal is the discrete
    gauge drift Delta of R_{(k+1),pp}; it vanishes identically for
    nilpotent-triangular potentials and is O(step) in the deformed calculus.
    ``on_diagonal`` chooses between rejecting it ("raise") and carrying the
    full coefficient ("keep", used by the time stepper, where dropping it
    would break flow commutativity and the Lax consistency of the evolution).
    """
    if not 0 <= k <= state.depth - 2:
        raise ValidityError(
            f"flow order {k} needs depth >= k+2 (have {state.depth})"
        )
    if on_diagonal not in ("raise", "keep"):
        raise ValueError(f"unknown diagonal policy {on_diagonal!r}")
    resolvent = state.resolvent(alpha)
    b, _ = projector_b(resolvent, k)
    comm = commutator_with_l(b, state.data, state.U)
    pos = scalars.zero(state.mode)
    for n in comm.sites():
        s = comm.at(n)
        for d in range(max(1, s.lo), s.hi + 1):
            v = s.get(d).max_abs()
            if v > pos:
                pos = v
    if pos > tol:
        raise ConsistencyError(
            f"positive z-degrees of the flow commutator do not vanish "
            f"(residual {pos}): inconsistent dressing or depth"
        )
    zero = SmallMatrix.zero(state.data.m, state.mode)
    deg0 = LatticeFn(comm.lo, comm.hi,
                     tuple(comm.at(n).get(0) for n in comm.sites()),
                     zero, zero, comm.step, comm.mode)
    if on_diagonal == "raise":
        drift = scalars.zero(state.mode)
        for n in deg0.sites():
            v = deg0.at(n).diagonal_part().max_abs()
            if v > drift:
                drift = v
        if drift > tol:
            raise ConsistencyError(
                f"degree-0 diagonal of the flow field is nonzero "
                f"(drift {drift}); pass on_diagonal='keep' to carry it"
            )
    return deg0
