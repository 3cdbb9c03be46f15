import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from primerace.characters import (
    RaceSpec,
    build_character_table,
    c_q,
    character,
    conductor_and_inducer,
    divisor_count,
    eval_character,
    factorize,
    ratio,
)
from primerace.errors import InvalidClass, InvalidModulus

MODULI = [3, 4, 5, 7, 8, 9, 12, 15, 16, 20, 24, 25, 27, 30, 32, 36, 49]


def totient(q):
    return sum(1 for a in range(1, q + 1) if math.gcd(a, q) == 1)


def test_table_sizes_and_examples():
    t5 = build_character_table(5)
    assert len(t5) == 4 and len(t5.nontrivial) == 3
    assert sorted(chi.order for chi in t5) == [1, 2, 4, 4]
    t4 = build_character_table(4)
    assert len(t4) == 2
    assert t4.nontrivial[0].value(3) == -1
    assert eval_character(t4.nontrivial[0], 3) == -1
    t12 = build_character_table(12)
    assert len(t12) == 4 and all(chi.is_real for chi in t12)


def test_small_modulus_rejected():
    with pytest.raises(InvalidModulus):
        build_character_table(2)


@pytest.mark.parametrize("q", MODULI)
def test_table_is_the_full_dual_group(q):
    table = build_character_table(q)
    units = [a for a in range(1, q) if math.gcd(a, q) == 1]
    assert len(table) == totient(q) == table.modulus.phi
    assert table.principal.is_principal
    V = np.array([[chi.value(a) for a in units] for chi in table])
    # orthogonality in both directions
    G = V.conj() @ V.T
    assert np.allclose(G, len(units) * np.eye(len(units)), atol=1e-10)
    H = V.T @ V.conj()
    assert np.allclose(H, len(units) * np.eye(len(units)), atol=1e-10)


@pytest.mark.parametrize("q", MODULI)
def test_multiplicativity_and_conventions(q):
    table = build_character_table(q)
    for chi in table:
        assert chi.value(1) == 1
        for n in range(q):
            if math.gcd(n, q) > 1:
                assert chi.value(n) == 0
        for m in range(1, q):
            for n in range(1, q):
                if math.gcd(m * n, q) == 1:
                    assert abs(chi.value(m * n) - chi.value(m) * chi.value(n)) < 1e-12
                    em, en, emn = chi.exponent(m), chi.exponent(n), chi.exponent(m * n)
                    # exact exponents add mod 1
                    assert (em[0] * en[1] * emn[1] + en[0] * em[1] * emn[1] - emn[0] * em[1] * en[1]) % (
                        em[1] * en[1] * emn[1]
                    ) == 0
        assert chi.parity == (0 if chi.value(q - 1) == 1 else 1)


@pytest.mark.parametrize("q", [5, 7, 8, 9, 13, 16, 21])
def test_conjugate_character(q):
    table = build_character_table(q)
    for chi in table:
        bar = table[chi.conj_index()]
        for n in range(q):
            assert abs(bar.value(n) - chi.value(n).conjugate()) < 1e-12


def conrey_brute(q, m, n):
    """Conrey character for odd prime power q with the least primitive root."""
    from primerace.characters import conrey_generator

    p, e = factorize(q)[0]
    g = conrey_generator(p, e)
    phi = totient(q)
    dlog = {pow(g, k, q): k for k in range(phi)}
    return cmath.exp(2j * math.pi * dlog[m % q] * dlog[n % q] / phi)


@pytest.mark.parametrize("q", [3, 5, 7, 9, 11, 25, 27])
def test_conrey_labels_odd_prime_powers(q):
    for m in range(1, q):
        if math.gcd(m, q) != 1:
            continue
        chi = character(q, m)
        for n in range(1, q):
            if math.gcd(n, q) == 1:
                assert abs(chi.value(n) - conrey_brute(q, m, n)) < 1e-12


def test_conrey_label_examples():
    # chi_5(2, .) takes 2 to i (2 is the least primitive root mod 5)
    assert abs(character(5, 2).value(2) - 1j) < 1e-15
    # mod 8, writing n = +-5^a: chi_8(3, .) is the odd symbol (-8/.), chi_8(5, .) the even symbol (8/.)
    c3 = character(8, 3)
    assert [round(c3.value(n).real) for n in (1, 3, 5, 7)] == [1, 1, -1, -1]
    c5 = character(8, 5)
    assert [round(c5.value(n).real) for n in (1, 3, 5, 7)] == [1, -1, -1, 1]
    assert c3.parity == 1 and c5.parity == 0


def test_order_four_character_mod5():
    chi = [c for c in build_character_table(5) if c.order == 4][0]
    assert abs(chi.value(2) ** 4 - 1) < 1e-12
    assert abs(chi.value(2) ** 2 - 1) > 1


def test_conductor_examples():
    chi = character(6, 5)
    d, psi = conductor_and_inducer(chi)
    assert d == 3 and psi.q == 3 and psi.is_primitive
    for n in range(1, 6):
        if math.gcd(n, 6) == 1:
            assert chi.value(n) == psi.value(n)
    five = build_character_table(5).nontrivial[0]
    d, psi = conductor_and_inducer(five)
    assert d == 5 and psi == five
    d, psi = conductor_and_inducer(build_character_table(12).principal)
    assert d == 1


@pytest.mark.parametrize("q", [8, 9, 12, 15, 16, 20, 24, 28, 45, 60])
def test_inducer_is_primitive_and_agrees(q):
    table = build_character_table(q)
    for chi in table.nontrivial:
        d, psi = conductor_and_inducer(chi)
        assert q % d == 0
        assert psi.is_primitive
        # least modulus: no proper divisor of d induces chi
        for n in range(1, q):
            if math.gcd(n, q) == 1:
                assert abs(chi.value(n) - psi.value(n)) < 1e-12
        for d2 in range(1, d):
            if d % d2 == 0 and q % d2 == 0:
                assert not all(
                    abs(chi.value(n) - 1) < 1e-12 for n in range(1, q, d2) if math.gcd(n, q) == 1
                )


def test_c_q_examples():
    assert c_q(5, 1) == 1
    assert c_q(5, 2) == -1
    assert c_q(8, 1) == 3
    assert c_q(8, 3) == -1
    with pytest.raises(InvalidClass):
        c_q(6, 3)


@pytest.mark.parametrize("q", MODULI + [11, 61, 105, 151])
def test_c_q_invariants(q):
    units = [a for a in range(1, q + 1) if math.gcd(a, q) == 1]
    squares = {b * b % q for b in units}
    assert sum(c_q(q, a) + 1 for a in squares) == len(units)
    c1 = c_q(q, 1)
    for a in units:
        c = c_q(q, a)
        assert c < divisor_count(q)
        assert c == (c1 if a % q in squares else -1)


@given(st.integers(3, 200), st.data())
@settings(max_examples=60, deadline=None)
def test_ratio_is_exact_division(q, data):
    units = [a for a in range(1, q) if math.gcd(a, q) == 1]
    a = data.draw(st.sampled_from(units))
    b = data.draw(st.sampled_from(units))
    assert ratio(q, a, b) * a % q == b % q


def test_race_spec_validation():
    s = RaceSpec(5, (7, 3))
    assert s.classes == (2, 3) and s.r == 2
    with pytest.raises(InvalidClass):
        RaceSpec(5, (2, 7))
    with pytest.raises(InvalidClass):
        RaceSpec(6, (1, 3))
    with pytest.raises(InvalidClass):
        RaceSpec(5, (2,))
    with pytest.raises(InvalidModulus):
        RaceSpec(2, (1,))
