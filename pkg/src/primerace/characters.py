"""Reduced residues and the Dirichlet character group mod q.

Character values are stored exactly: chi(n) = exp(2*pi*i * k(n) / L) where
L is the exponent of (Z/qZ)* and k(n) an integer in [0, L). Floating point
only appears in :meth:`DirichletCharacter.value` and friends.

Labels follow Conrey: chi_q(m, .) is the product over prime powers p^e || q
of local characters defined through discrete logarithms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import InvalidClass, InvalidModulus


def factorize(n: int) -> list[tuple[int, int]]:
    out = []
    d = 2
    while d * d <= n:
        if n % d == 0:
            e = 0
            while n % d == 0:
                n //= d
                e += 1
            out.append((d, e))
        d += 1 if d == 2 else 2
    if n > 1:
        out.append((n, 1))
    return out


@dataclass(frozen=True)
class Modulus:
    q: int
    factorization: tuple[tuple[int, int], ...]
    phi: int

    @classmethod
    def of(cls, q: int) -> "Modulus":
        if q < 1:
            raise InvalidModulus(f"modulus must be positive, got {q}")
        fac = tuple(factorize(q))
        phi = 1
        for p, e in fac:
            phi *= p ** (e - 1) * (p - 1)
        return cls(q, fac, phi)

    def residues(self) -> list[int]:
        """Reduced residues in [1, q], ascending."""
        return [a for a in range(1, self.q + 1) if math.gcd(a, self.q) == 1]


def check_class(q: int, a: int) -> int:
    if math.gcd(a, q) != 1:
        raise InvalidClass(f"{a} is not coprime to {q}")
    a %= q
    return a if a else q


@dataclass(frozen=True)
class RaceSpec:
    """An ordered tuple of distinct reduced residues mod q."""

    q: int
    classes: tuple[int, ...]

    def __post_init__(self):
        if self.q < 3:
            raise InvalidModulus(f"race modulus must be >= 3, got {self.q}")
        canon = tuple(check_class(self.q, a) for a in self.classes)
        if len(set(canon)) != len(canon):
            raise InvalidClass(f"classes must be distinct mod {self.q}: {self.classes}")
        if len(canon) < 2:
            raise InvalidClass("a race needs at least two classes")
        object.__setattr__(self, "classes", canon)

    @property
    def r(self) -> int:
        return len(self.classes)

    def __str__(self):
        return f"q={self.q};" + ",".join(map(str, self.classes))


# -- local discrete logs -----------------------------------------------------

def _is_primitive_root(g: int, n: int, phi: int, prime_factors) -> bool:
    if math.gcd(g, n) != 1:
        return False
    return all(pow(g, phi // p, n) != 1 for p in prime_factors)


@lru_cache(maxsize=None)
def conrey_generator(p: int, e: int) -> int:
    """Least primitive root mod p^e (p odd); a root mod p^2 works for all e."""
    n = p * p if e >= 2 else p
    phi = n // p * (p - 1)
    pf = [f for f, _ in factorize(phi)]
    for g in range(2, n):
        if _is_primitive_root(g, n, phi, pf):
            return g
    raise AssertionError("no primitive root")  # pragma: no cover


@lru_cache(maxsize=None)
def _odd_dlog_table(p: int, e: int) -> dict[int, int]:
    n = p**e
    g = conrey_generator(p, e)
    table = {}
    x = 1
    for k in range(n // p * (p - 1)):
        table[x] = k
        x = x * g % n
    return table


@lru_cache(maxsize=None)
def _two_dlog_table(e: int) -> dict[int, tuple[int, int]]:
    """n -> (eps, b) with n = eps * 5^b mod 2^e, eps in {0 for +1, 1 for -1}."""
    n = 2**e
    table = {}
    x = 1
    span = max(1, n // 4)
    for b in range(span):
        table[x] = (0, b)
        table[(-x) % n] = (1, b)
        x = x * 5 % n
    return table


def _local_exponent(p: int, e: int, m: int, n: int, L: int) -> int:
    """Exponent (numerator over L) of the Conrey local character chi_{p^e}(m, n)."""
    pe = p**e
    m %= pe
    n %= pe
    if p == 2:
        if e == 1:
            return 0
        tab = _two_dlog_table(e)
        em, am = tab[m]
        en, bn = tab[n]
        k = (em * en) * (L // 2)
        if e >= 3:
            k += am * bn * (L // 2 ** (e - 2))
        return k % L
    tab = _odd_dlog_table(p, e)
    phi = pe // p * (p - 1)
    return tab[m] * tab[n] * (L // phi) % L


def group_exponent(mod: Modulus) -> int:
    L = 1
    for p, e in mod.factorization:
        if p == 2:
            part = 1 if e == 1 else (2 if e == 2 else 2 ** (e - 2))
        else:
            part = p ** (e - 1) * (p - 1)
        L = L * part // math.gcd(L, part)
    return L


_QUARTER = {0: 1 + 0j, 1: 1j, 2: -1 + 0j, 3: -1j}


def root_of_unity(k, L):
    """exp(2 pi i k / L), exact at multiples of a quarter turn."""
    k = np.asarray(k) % L
    out = np.exp(2j * np.pi * k / L)
    if L % 4 == 0:
        quarter = L // 4
        for j, v in _QUARTER.items():
            out = np.where(k == j * quarter, v, out)
    elif L % 2 == 0:
        out = np.where(k == 0, 1 + 0j, np.where(k == L // 2, -1 + 0j, out))
    else:
        out = np.where(k == 0, 1 + 0j, out)
    return out


@dataclass(frozen=True, eq=False)
class DirichletCharacter:
    modulus: Modulus
    conrey_index: int
    denom: int  # L
    exponents: np.ndarray = field(repr=False)  # length q, -1 where gcd(n, q) > 1

    @property
    def q(self) -> int:
        return self.modulus.q

    def __eq__(self, other):
        return (
            isinstance(other, DirichletCharacter)
            and self.q == other.q
            and self.conrey_index == other.conrey_index
        )

    def __hash__(self):
        return hash((self.q, self.conrey_index))

    def exponent(self, n: int):
        """Exact value as a (numerator, denominator) pair, or None when chi(n) = 0."""
        k = int(self.exponents[n % self.q])
        if k < 0:
            return None
        g = math.gcd(k, self.denom)
        return k // g, self.denom // g

    def value(self, n: int) -> complex:
        k = int(self.exponents[n % self.q])
        if k < 0:
            return 0j
        return complex(root_of_unity(k, self.denom))

    def values(self, ns) -> np.ndarray:
        ks = self.exponents[np.asarray(ns) % self.q]
        return np.where(ks < 0, 0j, root_of_unity(np.maximum(ks, 0), self.denom))

    @property
    def is_principal(self) -> bool:
        return self.conrey_index % self.q == 1 % self.q

    @property
    def order(self) -> int:
        ks = self.exponents[self.exponents >= 0]
        g = self.denom
        for k in ks:
            g = math.gcd(g, int(k))
        return self.denom // g

    @property
    def is_real(self) -> bool:
        return self.order <= 2

    @property
    def parity(self) -> int:
        """0 for even characters, 1 for odd ones."""
        k = int(self.exponents[(self.q - 1) % self.q])
        return 0 if k == 0 else 1

    @property
    def conductor(self) -> int:
        return conductor_and_inducer(self)[0]

    @property
    def is_primitive(self) -> bool:
        return self.conductor == self.q

    def conj_index(self) -> int:
        return pow(self.conrey_index, -1, self.q) if self.q > 1 else 1

    def label(self) -> str:
        return f"{self.q}.{self.conrey_index}"

    def __repr__(self):
        return f"DirichletCharacter({self.label()})"


def _build_exponents(mod: Modulus, m: int, L: int) -> np.ndarray:
    q = mod.q
    ex = np.full(q, -1, dtype=np.int64)
    for n in range(q):
        if math.gcd(n, q) != 1:
            continue
        k = 0
        for p, e in mod.factorization:
            k += _local_exponent(p, e, m, n, L)
        ex[n] = k % L
    if q == 1:
        ex[0] = 0
    return ex


def character(q: int, m: int) -> DirichletCharacter:
    mod = Modulus.of(q)
    if math.gcd(m, q) != 1:
        raise InvalidClass(f"Conrey index {m} is not coprime to {q}")
    L = group_exponent(mod)
    m = m % q if q > 1 else 1
    if m == 0:
        m = 1
    return DirichletCharacter(mod, m, L, _build_exponents(mod, m, L))


@dataclass(frozen=True)
class CharacterTable:
    modulus: Modulus
    characters: tuple[DirichletCharacter, ...]

    @property
    def q(self) -> int:
        return self.modulus.q

    @property
    def principal(self) -> DirichletCharacter:
        return self.characters[0]

    @property
    def nontrivial(self) -> tuple[DirichletCharacter, ...]:
        return self.characters[1:]

    def __len__(self):
        return len(self.characters)

    def __iter__(self):
        return iter(self.characters)

    def __getitem__(self, conrey_index: int) -> DirichletCharacter:
        for chi in self.characters:
            if chi.conrey_index == conrey_index % self.q:
                return chi
        raise KeyError(conrey_index)

    def value_matrix(self, classes) -> np.ndarray:
        """Complex matrix [character, class] of chi(a), principal row first."""
        return np.array([chi.values(classes) for chi in self.characters])


@lru_cache(maxsize=256)
def build_character_table(q: int) -> CharacterTable:
    if q < 3:
        raise InvalidModulus(f"character tables need q >= 3, got {q}")
    mod = Modulus.of(q)
    L = group_exponent(mod)
    # principal first, then ascending Conrey index
    chars = tuple(
        DirichletCharacter(mod, m, L, _build_exponents(mod, m, L)) for m in mod.residues()
    )
    chars = (chars[0],) + chars[1:]
    return CharacterTable(mod, chars)


def eval_character(chi: DirichletCharacter, n: int) -> complex:
    return chi.value(n)


@lru_cache(maxsize=4096)
def _conductor_cached(q: int, m: int) -> int:
    chi = character(q, m)
    for d in sorted(_divisors(q)):
        # chi factors through (Z/d)* iff chi(n) = 1 whenever n = 1 mod d
        if all(
            chi.exponents[n] == 0
            for n in range(1, q, d)
            if math.gcd(n, q) == 1
        ):
            return d
    return q  # pragma: no cover


def _divisors(n: int) -> list[int]:
    return [d for d in range(1, n + 1) if n % d == 0]


def conductor_and_inducer(chi: DirichletCharacter):
    """(conductor, primitive character inducing chi).

    The principal character returns conductor 1 and the trivial character mod 1.
    """
    d, m = _inducer_cached(chi.q, chi.conrey_index)
    if d == 1:
        return 1, TRIVIAL
    return d, character(d, m)


@lru_cache(maxsize=4096)
def _inducer_cached(q: int, m: int) -> tuple[int, int]:
    d = _conductor_cached(q, m)
    if d == 1:
        return 1, 1
    if d == q:
        return q, m
    chi = character(q, m)
    units = [n for n in range(1, q) if math.gcd(n, q) == 1]
    for cand in Modulus.of(d).residues():
        psi = character(d, cand)
        span = psi.denom * chi.denom
        if all(
            (int(psi.exponents[n % d]) * chi.denom - int(chi.exponents[n]) * psi.denom) % span == 0
            for n in units
        ):
            return d, cand
    raise AssertionError(f"no inducer for {q}.{m}")  # pragma: no cover


TRIVIAL = DirichletCharacter(Modulus(1, (), 1), 1, 1, np.zeros(1, dtype=np.int64))


def c_q(q: int, a: int) -> int:
    """-1 plus the number of square roots of a mod q, by enumeration."""
    if math.gcd(a, q) != 1:
        raise InvalidClass(f"{a} is not coprime to {q}")
    return -1 + sum(1 for b in range(1, q + 1) if (b * b - a) % q == 0)


def divisor_count(n: int) -> int:
    out = 1
    for _, e in factorize(n):
        out *= e + 1
    return out


def ratio(q: int, a: int, b: int) -> int:
    """b / a mod q with an exact modular inverse."""
    return b * pow(a, -1, q) % q

