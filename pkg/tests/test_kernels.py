import math

import numpy as np
import pytest
import scipy.special
from hypothesis import given, settings
from hypothesis import strategies as st

from primerace import kernels
from primerace._accel import HAVE_NUMBA, backend_name

needs_numba = pytest.mark.skipif(not HAVE_NUMBA, reason="numba not installed")


def both(monkeypatch, fn):
    monkeypatch.setenv("PRIMERACE_NUMBA", "0")
    assert backend_name() == "numpy"
    a = fn()
    monkeypatch.setenv("PRIMERACE_NUMBA", "1")
    b = fn()
    return a, b


def small_model(rng, groups=(5, 0, 7, 3)):
    offs = np.concatenate([[0], np.cumsum(groups)]).astype(np.int64)
    w = rng.uniform(0.01, 0.3, offs[-1])
    return w, offs


def test_uniforms_in_unit_interval():
    u = kernels.uniforms_np(123, np.arange(100_000, dtype=np.uint64))
    assert u.min() >= 0 and u.max() < 1
    assert abs(u.mean() - 0.5) < 0.005


def test_phase_sums_definition(monkeypatch):
    """S[i, g] = sum over phases j of group g of w_j exp(2 pi i u_{(first+i) n + j})."""
    rng = np.random.default_rng(0)
    w, offs = small_model(rng)
    key, first, n = 99, 17, 40
    counters = (np.arange(first, first + n, dtype=np.uint64)[:, None] * np.uint64(w.size)
                + np.arange(w.size, dtype=np.uint64)[None, :])
    u = kernels.uniforms_np(key, counters)
    ref = np.stack([(np.exp(2j * math.pi * u[:, a:b]) * w[a:b]).sum(axis=1)
                    for a, b in zip(offs[:-1], offs[1:])], axis=1)
    monkeypatch.setenv("PRIMERACE_NUMBA", "0")
    got = kernels.phase_sums(w, offs, key, first, n)
    assert np.max(np.abs(got - ref)) < 1e-14
    assert np.all(got[:, 1] == 0)


@needs_numba
def test_phase_sums_backends_agree(monkeypatch):
    rng = np.random.default_rng(1)
    w, offs = small_model(rng, (300, 1, 0, 250))
    a, b = both(monkeypatch, lambda: kernels.phase_sums(w, offs, 2024, 5, 500))
    assert np.max(np.abs(a - b)) < 1e-12


def test_phase_sums_block_invariance(monkeypatch):
    rng = np.random.default_rng(2)
    w, offs = small_model(rng)
    full = kernels.phase_sums(w, offs, 7, 0, 100)
    parts = np.vstack([kernels.phase_sums(w, offs, 7, s, 25) for s in range(0, 100, 25)])
    assert np.array_equal(full, parts)


def test_j0_matches_scipy(monkeypatch):
    x = np.concatenate([np.linspace(0, 30, 3001), np.geomspace(30, 1e6, 300), -np.linspace(0, 9, 50)])
    a, b = both(monkeypatch, lambda: kernels.j0(x))
    ref = scipy.special.j0(x)
    assert np.max(np.abs(a - ref)) < 1e-12
    assert np.max(np.abs(b - ref)) < 1e-12


def test_j0_product_against_direct(monkeypatch):
    rng = np.random.default_rng(3)
    w, offs = small_model(rng, (40, 0, 25, 60))
    amps = rng.uniform(0, 30, size=(20, 4))
    group = np.repeat(np.arange(4), np.diff(offs))
    direct = np.prod(scipy.special.j0(amps[:, group] * w[None, :]), axis=1)
    for flag in ("0", "1") if HAVE_NUMBA else ("0",):
        monkeypatch.setenv("PRIMERACE_NUMBA", flag)
        la, sg = kernels.j0_product(amps, w, offs)
        got = sg * np.exp(la)
        assert np.allclose(got, direct, rtol=1e-11, atol=1e-300)


def test_j0_product_zero_amplitude_is_one():
    rng = np.random.default_rng(4)
    w, offs = small_model(rng)
    la, sg = kernels.j0_product(np.zeros((3, 4)), w, offs)
    assert np.all(la == 0) and np.all(sg == 1)


def test_hurwitz_head_backends(monkeypatch):
    alphas = np.array([0.2, 0.5, 1.0])
    ts = np.array([0.0, 3.0, 50.0])
    a, b = both(monkeypatch, lambda: kernels.hurwitz_head(alphas, ts, 50))
    k = np.arange(50)
    ref = np.array([[np.sum((k + al) ** (-0.5 - 1j * t)) for t in ts] for al in alphas])
    assert np.allclose(a, ref, rtol=1e-12)
    assert np.allclose(b, ref, rtol=1e-12)


def primes_upto(n):
    return [p for p in range(2, n) if all(p % d for d in range(2, int(p**0.5) + 1))]


@given(st.integers(0, 5000), st.integers(1, 3000))
@settings(max_examples=50, deadline=None)
def test_sieve_segment_matches_trial_division(lo, width):
    hi = lo + width
    base = np.array(primes_upto(int(math.isqrt(hi)) + 2), dtype=np.int64)
    ref = np.array([n >= 2 and all(n % d for d in range(2, math.isqrt(n) + 1)) for n in range(lo, hi)])
    assert np.array_equal(kernels.sieve_segment(lo, hi, base), ref)


@needs_numba
def test_sieve_backends_agree(monkeypatch):
    base = np.array(primes_upto(1100), dtype=np.int64)
    a, b = both(monkeypatch, lambda: kernels.sieve_segment(10**6 - 500, 10**6 + 500, base))
    assert np.array_equal(a, b)
