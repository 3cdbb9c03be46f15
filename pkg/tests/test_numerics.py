import math

import numpy as np
import pytest
import scipy.integrate
import scipy.special
import scipy.stats
from hypothesis import given, settings
from hypothesis import strategies as st

from primerace import kernels
from primerace.errors import InvalidCovariance, InvalidScale, SingularMatrix
from primerace.numerics import (
    BoundViolation,
    PerturbedIdentityMatrix,
    RandomStream,
    SaturationWarning,
    bessel_i0,
    bessel_j0,
    det_perturbed,
    gaussian_density,
    gaussian_fourier_truncated,
    inverse_perturbed,
    ordering_probability_gaussian,
    quadratic_form_floor,
    scaled_identity_order_integral,
    scaled_identity_order_mc,
)


def series_j0(x, terms=40):
    h = -0.25 * x * x
    total, term = 1.0, 1.0
    for n in range(1, terms):
        term *= h / (n * n)
        total += term
    return total


def test_j0_values():
    assert bessel_j0(0.0) == 1.0
    assert abs(bessel_j0(2.0) - series_j0(2.0)) < 1e-12
    xs = np.concatenate([np.linspace(-50, 50, 4001), np.geomspace(8, 5e4, 500)])
    ref = scipy.special.j0(xs)
    got = np.array([bessel_j0(x) for x in xs])
    assert np.max(np.abs(got - ref)) < 1e-12
    assert np.max(np.abs(kernels.j0(xs) - ref)) < 1e-12


def test_j0_bounds_near_zero():
    xs = np.linspace(-1, 1, 1000)
    j = kernels.j0(xs)
    assert np.all(np.abs(j) <= np.exp(-xs * xs / 4))
    x = xs[(xs > 0)]
    j = kernels.j0(x)
    assert np.all(1 - x**2 / 4 <= j + 1e-15)
    assert np.all(j <= 1 - x**2 / 4 + x**4 / 64 + 1e-15)


def test_i0():
    assert bessel_i0(0.0) == 1.0
    s = np.linspace(-10, 10, 401)
    got = np.array([bessel_i0(v) for v in s])
    assert np.all(got <= np.exp(s * s / 4))
    assert np.allclose(got, scipy.special.i0(s), rtol=1e-13)
    h, total, term = 0.25, 1.0, 1.0
    for n in range(1, 30):
        term *= h / (n * n)
        total += term
    assert abs(bessel_i0(1.0) - total) <= 1e-12 * total
    with pytest.warns(SaturationWarning):
        assert bessel_i0(701.0) == math.inf


def test_random_stream_reproducible():
    a = RandomStream(7, 3)
    assert np.array_equal(a.uniforms(10, 100), RandomStream(7, 3).uniforms(10, 100))
    # a window of the sequence depends only on its positions
    assert np.array_equal(a.uniforms(0, 200)[50:150], a.uniforms(50, 100))
    assert not np.array_equal(a.uniforms(0, 50), RandomStream(7, 4).uniforms(0, 50))
    assert a.child("x", 1) == a.child("x", 1) != a.child("x", 2)
    u = a.uniforms(0, 200_000)
    assert u.min() >= 0 and u.max() < 1
    assert scipy.stats.kstest(u, "uniform").pvalue > 1e-4


def test_det_examples():
    I = PerturbedIdentityMatrix(np.eye(4))
    assert det_perturbed(I).det == 1.0
    eps = 0.3
    A = PerturbedIdentityMatrix(np.array([[1, eps], [eps, 1.0]]))
    assert abs(det_perturbed(A).det - (1 - eps**2)) < 1e-15
    with pytest.raises(SingularMatrix):
        det_perturbed(PerturbedIdentityMatrix(np.ones((3, 3))))


def test_inverse_examples():
    rep = inverse_perturbed(PerturbedIdentityMatrix(np.eye(5)))
    assert np.array_equal(rep.inverse, np.eye(5)) and rep.holds
    rng = np.random.default_rng(5)
    A = PerturbedIdentityMatrix.random(6, 0.05, rng)
    inv = inverse_perturbed(A).inverse
    assert np.max(np.abs(inv @ A.entries - np.eye(6))) < 1e-10


def random_matrices(n, seed):
    rng = np.random.default_rng(seed)
    for _ in range(n):
        r = int(rng.integers(2, 13))
        eps = rng.uniform(0, 0.5 / r)
        yield PerturbedIdentityMatrix.random(r, eps, rng)


def test_matrix_bound_constants():
    for A in random_matrices(1000, 11):
        d = det_perturbed(A)
        assert d.applicable and d.holds
        assert abs(d.det - np.linalg.det(A.entries)) < 1e-12
        inv = inverse_perturbed(A)
        assert inv.applicable and inv.holds


def test_quadratic_form_floor():
    A = PerturbedIdentityMatrix(np.eye(3))
    assert quadratic_form_floor(A, np.zeros(3)) == 0.0
    t = np.array([1.0, -2.0, 0.5])
    assert quadratic_form_floor(A, t) == pytest.approx(t @ t)
    rng = np.random.default_rng(3)
    for _ in range(10_000):
        r = int(rng.integers(1, 13))
        A = PerturbedIdentityMatrix.random(r, rng.uniform(0, 1 / (2 * r)), rng)
        t = rng.normal(size=r)
        assert quadratic_form_floor(A, t) >= 0.5 * (t @ t) * (1 - 1e-12)


def test_quadratic_form_outside_range_is_unasserted():
    A = PerturbedIdentityMatrix(np.array([[1.0, -0.9], [-0.9, 1.0]]))
    assert quadratic_form_floor(A, np.array([1.0, 1.0])) == pytest.approx(0.2)


def test_matrix_validation():
    with pytest.raises(ValueError):
        PerturbedIdentityMatrix(np.array([[1.0, 0.1], [0.2, 1.0]]))
    with pytest.raises(ValueError):
        PerturbedIdentityMatrix(np.array([[2.0, 0.0], [0.0, 1.0]]))


def closed_form(A, x):
    return gaussian_density(A, x)


@pytest.mark.parametrize("R", [10 * math.sqrt(2), 20.0])
def test_truncated_fourier_r2(R):
    A = np.eye(2)
    v = gaussian_fourier_truncated(A, np.zeros(2), R)
    assert abs(v - 1 / (2 * math.pi)) <= math.exp(-R * R / 5) + 1e-8
    rng = np.random.default_rng(8)
    for _ in range(5):
        M = PerturbedIdentityMatrix.random(2, 0.25, rng)
        x = rng.normal(size=2)
        assert abs(gaussian_fourier_truncated(M, x, R) - closed_form(M.entries, x)) <= 2 * math.exp(-R * R / 5) + 1e-8


def test_truncated_fourier_r1_against_erf():
    # (1/2pi) int_{-R}^{R} cos(t x) exp(-t^2/2) dt, x = 0: erf(R/sqrt 2)/sqrt(2 pi)
    for R in (1.0, 2.5, 4.0):
        v = gaussian_fourier_truncated(np.eye(1), np.zeros(1), R)
        assert abs(v - math.erf(R / math.sqrt(2)) / math.sqrt(2 * math.pi)) < 1e-8


def test_truncated_fourier_far_point():
    x = np.array([10.0, 0.0])
    R = 20.0
    v = gaussian_fourier_truncated(np.eye(2), x, R)
    c = closed_form(np.eye(2), x)
    assert abs(v) < 1e-8 and c < 1e-8
    # 2 exp(-R^2/5) is 1.8e-35 here, far below double roundoff; the same 1e-8 floor as elsewhere
    assert abs(v - c) <= 2 * math.exp(-R * R / 5) + 1e-8


def test_truncated_fourier_r3_and_ball_mc():
    A = np.array([[1.0, 0.1, -0.05], [0.1, 1.0, 0.08], [-0.05, 0.08, 1.0]])
    x = np.array([0.3, -0.2, 0.1])
    assert abs(gaussian_fourier_truncated(A, x, 10 * math.sqrt(3)) - closed_form(A, x)) < 1e-8
    A4 = np.eye(4)
    v = gaussian_fourier_truncated(A4, np.zeros(4), 6.0, stream=RandomStream(1), n_mc=400_000)
    assert abs(v - closed_form(A4, np.zeros(4))) < 0.05 * closed_form(A4, np.zeros(4))


def test_truncation_error_decreases_with_R():
    A = np.array([[1.0, 0.2], [0.2, 1.0]])
    x = np.array([0.4, 0.1])
    errs = [abs(gaussian_fourier_truncated(A, x, R) - closed_form(A, x)) for R in (1.0, 2.0, 3.0, 4.0)]
    assert all(b <= a for a, b in zip(errs, errs[1:]))


def test_ordering_probability_examples():
    s = RandomStream(1, 0)
    e = ordering_probability_gaussian(np.eye(2), N=200_000, stream=s)
    assert abs(e.value - 0.5) <= 3 * e.stderr
    e = ordering_probability_gaussian(np.eye(4), N=400_000, stream=s.child("r4"))
    assert abs(e.value - 1 / 24) <= 3 * e.stderr
    # rho = 0.5 with shifted means: P(Z1 - Z2 > 0), Z1 - Z2 ~ N(m1 - m2, 2 - 2 rho)
    C = np.array([[1.0, 0.5], [0.5, 1.0]])
    m = np.array([0.3, -0.1])
    e = ordering_probability_gaussian(C, N=400_000, stream=s.child("rho"), mean=m)
    ref = scipy.integrate.quad(lambda y: scipy.stats.norm.pdf(y, 0.4, 1.0), 0, np.inf)[0]
    assert abs(e.value - ref) <= 3 * e.stderr


def test_ordering_probability_rejects_indefinite():
    with pytest.raises(InvalidCovariance):
        ordering_probability_gaussian(np.array([[1.0, 2.0], [2.0, 1.0]]), N=10_000)


def test_scaled_identity_integral():
    assert scaled_identity_order_integral(0.0, 3) == pytest.approx(1 / 6)
    assert scaled_identity_order_integral(0.5, 1) == pytest.approx(1.5**-0.5)
    k = 0.1
    ref, _ = scipy.integrate.dblquad(
        lambda x2, x1: math.exp(-0.5 * (1 + k) * (x1 * x1 + x2 * x2)) / (2 * math.pi),
        -12, 12, lambda x1: -12, lambda x1: x1,
    )
    assert abs(scaled_identity_order_integral(k, 2) - ref) <= 0.01 * ref
    est = scaled_identity_order_mc(k, 3, 400_000, RandomStream(2))
    assert abs(est.value - scaled_identity_order_integral(k, 3)) <= 3 * est.stderr
    with pytest.raises(InvalidScale):
        scaled_identity_order_integral(-1.0, 2)


@given(st.integers(1, 12), st.floats(0, 1), st.integers(0, 2**31))
@settings(max_examples=100, deadline=None)
def test_random_perturbed_matrices_have_unit_diagonal(r, frac, seed):
    A = PerturbedIdentityMatrix.random(r, frac / (2 * r), np.random.default_rng(seed))
    assert np.all(np.diag(A.entries) == 1.0)
    assert A.epsilon <= frac / (2 * r)
