"""Dressing solver tests, including the dense-linear-solve oracle."""

from fractions import Fraction
import random

import pytest

from aknsd.errors import ConsistencyError, InstanceError
from aknsd.hierarchy import (
    AknsData,
    HierarchyState,
    dressing_residual,
    solve_two_point,
)
from aknsd.instances import (
    DESK_WINDOW,
    desk_data,
    impulse_potential,
    random_potential,
    vacuum_potential,
)
from aknsd.lattice import LatticeFn, Window
from aknsd.matrices import SmallMatrix
from helpers import RAT


def dense_two_point_oracle(a_i, a_j, rhs, lo, hi, direction):
    """Brute-force alternative to the marching kernel: assemble the full
    linear system (one row per transition plus the boundary row) and solve it
    by exact Gaussian elimination."""
    size = hi - lo + 1
    rows = []
    vec = []
    for n in range(lo, hi):
        row = [Fraction(0)] * size
        row[n - lo] = Fraction(a_i)
        row[n + 1 - lo] = Fraction(-a_j)
        rows.append(row)
        vec.append(Fraction(rhs.get(n, 0)))
    boundary = [Fraction(0)] * size
    boundary[0 if direction == "forward" else size - 1] = Fraction(1)
    rows.append(boundary)
    vec.append(Fraction(0))
    # gaussian elimination
    for col in range(size):
        piv = next(r for r in range(col, size) if rows[r][col] != 0)
        rows[col], rows[piv] = rows[piv], rows[col]
        vec[col], vec[piv] = vec[piv], vec[col]
        p = rows[col][col]
        rows[col] = [x / p for x in rows[col]]
        vec[col] = vec[col] / p
        for r in range(size):
            if r != col and rows[r][col] != 0:
                f = rows[r][col]
                rows[r] = [x - f * y for x, y in zip(rows[r], rows[col])]
                vec[r] = vec[r] - f * vec[col]
    return vec


def test_two_point_kernel_matches_dense_solve():
    rng = random.Random(0)
    for direction, (ai, aj) in (("forward", (1, -1)), ("backward", (2, 1))):
        rhs = {n: Fraction(rng.randint(-3, 3), rng.choice((1, 2))) for n in range(-5, 5)}
        got = solve_two_point(Fraction(ai), Fraction(aj), rhs, -5, 5, direction, RAT)
        want = dense_two_point_oracle(ai, aj, rhs, -5, 5, direction)
        assert got == want


def test_vacuum_dressing_is_zero():
    data = desk_data(2)
    state = HierarchyState.solve(data, vacuum_potential(DESK_WINDOW, 2), DESK_WINDOW, 4)
    for w in state.dressing.ws:
        assert all(w.at(n).is_zero() for n in w.sites())
    assert dressing_residual(state) == 0


def test_impulse_order_one_closed_form():
    # m=2, A=diag(1,-1), U = E_12 at n=0: the (1,2) recursion reads
    # w(n) + w(n+1) = delta_{n,0}, solved forward from a zero left tail,
    # giving the alternating profile 0,...,0,1,-1,1,-1,...
    data = desk_data(2)
    U = impulse_potential(DESK_WINDOW, 2)
    state = HierarchyState.solve(data, U, DESK_WINDOW, 3)
    w1 = state.dressing.ws[0]
    for n in w1.sites():
        expect = 0 if n <= 0 else (-1) ** (n + 1)
        assert w1.at(n).get(1, 2) == expect
        assert w1.at(n).get(2, 1) == 0
    assert dressing_residual(state) == 0


def test_w1_diagonal_vanishes():
    data = desk_data(3)
    rng = random.Random(5)
    U = random_potential(DESK_WINDOW, data, rng)
    state = HierarchyState.solve(data, U, DESK_WINDOW, 4)
    w1 = state.dressing.ws[0]
    for n in w1.sites():
        assert w1.at(n).diagonal_part().is_zero()


@pytest.mark.parametrize("m", [2, 3])
def test_random_potentials_residual_exactly_zero(m):
    data = desk_data(m)
    rng = random.Random(42 + m)
    for _ in range(5):
        U = random_potential(DESK_WINDOW, data, rng)
        state = HierarchyState.solve(data, U, DESK_WINDOW, 6)
        assert dressing_residual(state) == 0


def test_perturbed_dressing_has_localized_residual():
    data = desk_data(2)
    U = impulse_potential(DESK_WINDOW, 2)
    state = HierarchyState.solve(data, U, DESK_WINDOW, 4)
    w1 = state.dressing.ws[0]
    bump = SmallMatrix.unit(2, 1, 2, RAT)
    site = 3
    vals = tuple(
        v + bump if n == site else v for n, v in zip(w1.sites(), w1.values)
    )
    from aknsd.hierarchy import Dressing

    tampered = Dressing(
        state.depth,
        (LatticeFn(w1.lo, w1.hi, vals, w1.left_tail, w1.right_tail, w1.step, w1.mode),)
        + state.dressing.ws[1:],
        state.dressing.conventions,
    )
    bad = HierarchyState(data, U, DESK_WINDOW, state.depth, tampered)
    from aknsd.hierarchy import _dressing_defect

    defect = _dressing_defect(bad)
    nonzero_sites = [n for n in defect.sites() if not defect.at(n).is_zero()]
    assert nonzero_sites
    assert all(abs(n - site) <= 1 for n in nonzero_sites)


def test_depth_exceeding_halo_rejected():
    data = desk_data(2)
    small = Window(-4, 4, 2)
    U = vacuum_potential(small, 2)
    with pytest.raises(InstanceError):
        HierarchyState.solve(data, U, small, 3)


def test_akns_data_invariants():
    with pytest.raises(InstanceError):
        AknsData(2, (Fraction(1), Fraction(1)))
    with pytest.raises(InstanceError):
        AknsData(2, (Fraction(0), Fraction(1)))
