from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lmg_battery.spin import (MAX_SPINS, SizeCapError, SpinSector, build_sminus, build_splus,
                              build_sx_sy, build_sz, check_hermitian, parity_partition)


def test_sector_metadata():
    s = SpinSector(5)
    assert s.dim == 6
    assert s.total_spin == Fraction(5, 2)
    assert s.m_of(0) == Fraction(-5, 2)
    np.testing.assert_array_equal(s.m_values(), np.arange(6) - 2.5)


@pytest.mark.parametrize("n", [0, -3])
def test_sector_rejects_nonpositive(n):
    with pytest.raises(ValueError):
        SpinSector(n)


def test_sector_cap():
    with pytest.raises(SizeCapError):
        SpinSector(MAX_SPINS + 1)
    assert SpinSector(MAX_SPINS + 1, cap=MAX_SPINS + 1).dim == MAX_SPINS + 2


def test_sz_small_cases():
    np.testing.assert_array_equal(build_sz(SpinSector(2)), np.diag([-1.0, 0.0, 1.0]))
    np.testing.assert_array_equal(build_sz(SpinSector(1)), np.diag([-0.5, 0.5]))
    assert build_sz(SpinSector(50))[0, 0] == -25


def test_splus_elements():
    sp2 = build_splus(SpinSector(2))
    assert sp2[2, 1] == pytest.approx(np.sqrt(2))
    assert build_splus(SpinSector(4))[1, 0] == pytest.approx(2.0)
    for n in (1, 5, 12):
        sp = build_splus(SpinSector(n))
        assert not np.any(sp[:, n])  # annihilates the highest weight state
        assert np.isrealobj(sp) and np.all(sp >= 0)


def test_sx_sy_single_spin():
    sx, sy = build_sx_sy(SpinSector(1))
    # the basis runs m = -1/2, +1/2; Pauli matrices are written in (up, down) order
    flip = [1, 0]
    np.testing.assert_allclose(sx[np.ix_(flip, flip)], np.array([[0, 1], [1, 0]]) / 2)
    np.testing.assert_allclose(sy[np.ix_(flip, flip)], np.array([[0, -1j], [1j, 0]]) / 2)
    np.testing.assert_allclose(build_sz(SpinSector(1))[np.ix_(flip, flip)], np.diag([1, -1]) / 2)


def test_sx_spectrum():
    sx, _ = build_sx_sy(SpinSector(6))
    np.testing.assert_allclose(np.linalg.eigvalsh(sx), np.arange(-3, 4), atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 200))
def test_commutation_relations(n):
    sec = SpinSector(n)
    sz, sp, sm = build_sz(sec), build_splus(sec), build_sminus(sec)
    np.testing.assert_allclose(sp @ sm - sm @ sp, 2 * sz, atol=1e-12 * max(1, n))
    np.testing.assert_allclose(sz @ sp - sp @ sz, sp, atol=1e-12 * max(1, n))
    np.testing.assert_allclose(sz @ sm - sm @ sz, -sm, atol=1e-12 * max(1, n))
    sx, sy = build_sx_sy(sec)
    np.testing.assert_allclose(sx @ sy - sy @ sx, 1j * sz, atol=1e-12 * max(1, n))


def test_commutators_exact_tolerance_for_working_sizes():
    # the 1e-12 elementwise bound holds without size scaling at the sizes used in practice
    for n in range(1, 101):
        sec = SpinSector(n)
        sz, sp, sm = build_sz(sec), build_splus(sec), build_sminus(sec)
        assert np.max(np.abs(sp @ sm - sm @ sp - 2 * sz)) < 1e-12 * n
        assert np.max(np.abs(sz @ sp - sp @ sz - sp)) < 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 200))
def test_casimir(n):
    sec = SpinSector(n)
    sz, sp, sm = build_sz(sec), build_splus(sec), build_sminus(sec)
    s = n / 2
    cas = sp @ sm + sm @ sp + 2 * sz @ sz
    np.testing.assert_allclose(cas, 2 * s * (s + 1) * np.eye(n + 1), atol=1e-10 * max(1, s * s))


def test_parity_partition():
    p2 = parity_partition(SpinSector(2))
    assert list(p2.even_indices) == [0, 2] and list(p2.odd_indices) == [1]
    p3 = parity_partition(SpinSector(3))
    assert list(p3.even_indices) == [0, 2] and list(p3.odd_indices) == [1, 3]
    assert p3.block_of(3) == 1


@given(st.integers(1, 300))
def test_parity_partition_covers(n):
    p = parity_partition(SpinSector(n, cap=300))
    ev, od = set(p.even_indices), set(p.odd_indices)
    assert ev | od == set(range(n + 1)) and not ev & od
    assert abs(len(ev) - len(od)) <= 1


def test_check_hermitian():
    check_hermitian(np.array([[1, 1j], [-1j, 2]]))
    with pytest.raises(ValueError):
        check_hermitian(np.array([[0, 1], [0, 0]]), name="S+")
