from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sympy import Rational
from sympy.physics.quantum.cg import CG

from cxlab import spin_algebra as sa

half = Fraction(1, 2)


def _sympy_cg(j1, j2, m1, m2, J, M):
    R = lambda x: Rational(Fraction(x).numerator, Fraction(x).denominator)
    return float(CG(R(j1), R(m1), R(j2), R(m2), R(J), R(M)).doit())


@pytest.mark.parametrize(
    "j1,j2",
    [(half, half), (half, Fraction(3, 2)), (1, 1), (Fraction(3, 2), Fraction(3, 2)), (2, half), (Fraction(5, 2), 1)],
)
def test_clebsch_gordan_matches_sympy(j1, j2):
    j1, j2 = Fraction(j1), Fraction(j2)
    J = abs(j1 - j2)
    while J <= j1 + j2:
        for tM in range(-int(2 * J), int(2 * J) + 1, 2):
            M = Fraction(tM, 2)
            for tm1 in range(-int(2 * j1), int(2 * j1) + 1, 2):
                m1 = Fraction(tm1, 2)
                m2 = M - m1
                if abs(m2) > j2:
                    continue
                assert sa.clebsch_gordan(j1, j2, m1, m2, J, M) == pytest.approx(
                    _sympy_cg(j1, j2, m1, m2, J, M), abs=1e-13
                )
        J += 1


def test_clebsch_gordan_selection_rules():
    assert sa.clebsch_gordan(half, half, half, half, 1, 0) == 0.0
    assert sa.clebsch_gordan(1, 1, 1, 1, 2, 2) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        sa.clebsch_gordan(half, 1, 0, 0, 1, 0)


@given(st.integers(min_value=1, max_value=8))
@settings(max_examples=8, deadline=None)
def test_spin_matrix_algebra(tj):
    j = Fraction(tj, 2)
    Jx, Jy, Jz = sa.spin_matrices(j)
    assert np.allclose(Jx @ Jy - Jy @ Jx, 1j * Jz)
    J2 = Jx @ Jx + Jy @ Jy + Jz @ Jz
    assert np.allclose(J2, float(j * (j + 1)) * np.eye(tj + 1))


@pytest.mark.parametrize("sys_", [sa.RB87, sa.SpinSystem(half, 1, 1), sa.SpinSystem(half, half, half)])
def test_exchange_operator_constructions_agree(sys_):
    X = sa.exchange_operator(sys_, "projector")
    S = sa.exchange_operator(sys_, "swap")
    assert np.max(np.abs(X - S)) < 1e-12
    assert np.allclose(X @ X, np.eye(sys_.dim), atol=1e-12)
    Iz = sa.total_nuclear_z(sys_)
    assert np.allclose(X @ Iz, Iz @ X, atol=1e-12)


def test_gerade_ungerade_complete():
    P = sa.gerade_projector(sa.RB87)
    U = sa.ungerade_projector(sa.RB87)
    assert np.allclose(P + U, np.eye(sa.RB87.dim))
    assert np.allclose(P @ U, 0)
    # odd total nuclear spin I = 1, 3 for two spin-3/2 nuclei: 3 + 7 states
    assert np.linalg.matrix_rank(sa.gerade_projector(sa.RB87, embed=False)) == 10


def test_xi_values():
    rho = sa.mixed_state(sa.RB87, atom_manifold=2)
    assert sa.compute_xi(rho, sa.hyperfine_projector(sa.RB87, 1), sa.RB87) == pytest.approx(3 / 8, abs=1e-12)
    assert sa.compute_xi(rho, np.eye(sa.RB87.dim), sa.RB87) == pytest.approx(1.0, abs=1e-12)
    rho0 = sa.mixed_state(sa.SPINLESS, atom_manifold=half)
    assert sa.compute_xi(rho0, sa.hyperfine_projector(sa.SPINLESS, half), sa.SPINLESS) == pytest.approx(1.0)


def test_xi_by_direct_swap_oracle():
    # independent route: swap the nuclear labels explicitly on each basis state
    sys_ = sa.RB87
    rho = sa.mixed_state(sys_, atom_manifold=2)
    d = sys_.dims
    swap = np.zeros((sys_.dim, sys_.dim))
    for s in range(d[0]):
        for a in range(d[1]):
            for b in range(d[2]):
                swap[(s * d[1] + b) * d[2] + a, (s * d[1] + a) * d[2] + b] = 1
    P1 = sa.hyperfine_projector(sys_, 1)
    assert np.trace(P1 @ swap @ rho @ swap @ P1).real == pytest.approx(0.375, abs=1e-12)


def test_xi_exit_channels_sum_to_one():
    rho = sa.mixed_state(sa.RB87, atom_manifold=2)
    tot = sum(sa.compute_xi(rho, sa.hyperfine_projector(sa.RB87, F), sa.RB87) for F in (1, 2))
    assert tot == pytest.approx(1.0, abs=1e-12)


def test_invalid_inputs():
    with pytest.raises(ValueError):
        sa.SpinSystem(Fraction(1, 3), 1, 1)
    with pytest.raises(ValueError):
        sa.compute_xi(np.eye(sa.RB87.dim) / sa.RB87.dim, 0.5 * np.eye(sa.RB87.dim), sa.RB87)
    with pytest.raises(ValueError):
        sa.mixed_state(sa.RB87, states=[(3, 0)])
