"""Special functions, seeded streams and multivariate normal utilities."""
from __future__ import annotations

import hashlib
import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import kernels
from .errors import InvalidCovariance, InvalidScale, PrecisionFailure, SingularMatrix

# ---------------------------------------------------------------------------
# Bessel functions


def bessel_j0(x: float) -> float:
    """J0(x) to about 1e-13 absolute error for every finite x."""
    return float(kernels.j0_scalar(float(x)))


class SaturationWarning(RuntimeWarning):
    pass


I0_LIMIT = 700.0


def bessel_i0(s: float) -> float:
    """I0(s) by its power series; saturates to +inf (with a warning) past |s| = 700."""
    s = abs(float(s))
    if s > I0_LIMIT:
        warnings.warn(f"I0({s}) overflows the double range", SaturationWarning, stacklevel=2)
        return math.inf
    h = 0.25 * s * s
    total = 1.0
    term = 1.0
    n = 1
    while True:
        term *= h / (n * n)
        total += term
        if term < 1e-17 * total:
            return total
        n += 1


# ---------------------------------------------------------------------------
# random streams


@dataclass(frozen=True)
class RandomStream:
    """Counter-based stream: the value at position c depends only on (seed, stream_id, c)."""

    seed: int
    stream_id: int = 0

    @property
    def key(self) -> int:
        s = np.uint64(self.seed & 0xFFFFFFFFFFFFFFFF)
        i = np.uint64(self.stream_id & 0xFFFFFFFFFFFFFFFF)
        return int(kernels.mix64(s ^ kernels.mix64(i ^ kernels.GOLDEN)))

    def child(self, task: str, index: int = 0) -> "RandomStream":
        h = hashlib.blake2b(f"{self.stream_id}/{task}/{index}".encode(), digest_size=8)
        return RandomStream(self.seed, int.from_bytes(h.digest(), "little"))

    def uniforms(self, start: int, n: int) -> np.ndarray:
        return kernels.uniforms_np(self.key, np.arange(start, start + n, dtype=np.uint64))

    def generator(self) -> np.random.Generator:
        """numpy Generator on a Philox bit generator keyed by this stream."""
        return np.random.Generator(np.random.Philox(key=self.key))


# ---------------------------------------------------------------------------
# matrices with unit diagonal and small off-diagonal entries


@dataclass(frozen=True, eq=False)
class PerturbedIdentityMatrix:
    entries: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("matrix must be square")
        if not np.array_equal(a, a.T):
            raise ValueError("matrix must be symmetric")
        if not np.all(np.diag(a) == 1.0):
            raise ValueError("matrix must have unit diagonal")
        object.__setattr__(self, "entries", a)

    @property
    def r(self) -> int:
        return self.entries.shape[0]

    @property
    def epsilon(self) -> float:
        off = self.entries - np.eye(self.r)
        return float(np.max(np.abs(off))) if self.r > 1 else 0.0

    @classmethod
    def random(cls, r: int, epsilon: float, rng: np.random.Generator) -> "PerturbedIdentityMatrix":
        """Uniform off-diagonal entries in [-epsilon, epsilon]."""
        u = rng.uniform(-epsilon, epsilon, size=(r, r))
        a = np.triu(u, 1)
        a = a + a.T + np.eye(r)
        return cls(a)


@dataclass(frozen=True)
class DetReport:
    det: float
    residual: float
    bound: float
    applicable: bool
    holds: bool


def det_perturbed(A: PerturbedIdentityMatrix) -> DetReport:
    """LU determinant, and whether |det - 1| <= 2 (eps r)^2 (meaningful when eps r <= 1/2)."""
    with warnings.catch_warnings():
        # exact singularity is reported below as SingularMatrix
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(A.entries, check_finite=True)
    diag = np.diag(lu)
    if np.any(diag == 0.0):
        raise SingularMatrix("matrix is singular to machine precision")
    swaps = np.sum(piv != np.arange(piv.shape[0]))
    det = float(np.prod(diag)) * (-1.0) ** swaps
    cond = np.linalg.cond(A.entries)
    if not np.isfinite(cond) or cond > 1e15:
        raise SingularMatrix(f"condition number {cond:.3g}")
    residual = abs(det) * A.r * np.finfo(float).eps * cond
    er = A.epsilon * A.r
    bound = 2.0 * er * er
    return DetReport(det, residual, bound, er <= 0.5, abs(det - 1.0) <= bound + residual)


@dataclass(frozen=True)
class InverseReport:
    inverse: np.ndarray
    max_diag_dev: float
    max_offdiag: float
    diag_bound: float
    offdiag_bound: float
    applicable: bool
    holds: bool


def inverse_perturbed(A: PerturbedIdentityMatrix) -> InverseReport:
    """A^-1 with the entry bounds |a~_jj - 1| <= 8 (eps r)^2 and |a~_jk| <= 4 eps."""
    try:
        inv = scipy.linalg.inv(A.entries)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrix(str(exc)) from exc
    r = A.r
    eps = A.epsilon
    dd = float(np.max(np.abs(np.diag(inv) - 1.0)))
    off = inv - np.diag(np.diag(inv))
    oo = float(np.max(np.abs(off))) if r > 1 else 0.0
    db = 8.0 * (eps * r) ** 2
    ob = 4.0 * eps
    slack = 64 * np.finfo(float).eps
    return InverseReport(inv, dd, oo, db, ob, eps * r <= 0.5, dd <= db + slack and oo <= ob + slack)


class BoundViolation(AssertionError):
    pass


def quadratic_form_floor(A: PerturbedIdentityMatrix, t) -> float:
    """t^T A t; when eps <= 1/(2r) also checks it is at least |t|^2 / 2."""
    t = np.asarray(t, dtype=np.float64)
    val = float(t @ A.entries @ t)
    if A.epsilon <= 1.0 / (2 * A.r):
        floor = 0.5 * float(t @ t)
        if val < floor * (1 - 1e-12) - 1e-300:
            raise BoundViolation(f"t^T A t = {val} below |t|^2/2 = {floor}")
    return val


# ---------------------------------------------------------------------------
# Fourier transform of a Gaussian restricted to a ball


def gaussian_density(A, x) -> float:
    """Density at x of the centred normal with covariance A."""
    A = np.asarray(A, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    r = A.shape[0]
    sign, logdet = np.linalg.slogdet(A)
    if sign <= 0:
        raise InvalidCovariance("covariance is not positive definite")
    quad = float(x @ np.linalg.solve(A, x))
    return math.exp(-0.5 * r * math.log(2 * math.pi) - 0.5 * logdet - 0.5 * quad)


def _gl_panels(a, b, width, nodes):
    n_pan = max(1, int(math.ceil((b - a) / width)))
    xg, wg = np.polynomial.legendre.leggauss(nodes)
    edges = np.linspace(a, b, n_pan + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    pts = (mid[:, None] + half[:, None] * xg[None, :]).ravel()
    wts = (half[:, None] * wg[None, :]).ravel()
    return pts, wts


def _ball_quadrature(A, x, R, level):
    r = A.shape[0]
    nodes = 8 * 2**level
    width = 1.0
    rho, wr = _gl_panels(0.0, R, width, nodes // 2 + 4)
    if r == 1:
        t, w = _gl_panels(-R, R, width, nodes // 2 + 4)
        f = np.exp(1j * t * x[0] - 0.5 * A[0, 0] * t * t)
        return complex(np.sum(w * f)) / (2 * math.pi)
    if r == 2:
        m = 32 * 2**level
        phi = 2 * math.pi * np.arange(m) / m
        u = np.stack([np.cos(phi), np.sin(phi)])  # 2 x m
        q = np.einsum("im,ij,jm->m", u, A, u)
        xu = x @ u
        f = np.exp(1j * np.outer(rho, xu) - 0.5 * np.outer(rho**2, q))
        inner = f.sum(axis=1) * (2 * math.pi / m)
        return complex(np.sum(wr * rho * inner)) / (2 * math.pi) ** 2
    # r == 3: Gauss-Legendre in cos(theta), trapezoid in phi
    m = 32 * 2**level
    ct, wc = np.polynomial.legendre.leggauss(m // 2)
    st = np.sqrt(1 - ct**2)
    phi = 2 * math.pi * np.arange(m) / m
    u = np.stack(
        [np.outer(st, np.cos(phi)).ravel(), np.outer(st, np.sin(phi)).ravel(), np.repeat(ct, m)]
    )
    wu = np.repeat(wc, m) * (2 * math.pi / m)
    q = np.einsum("im,ij,jm->m", u, A, u)
    xu = x @ u
    total = 0j
    for rr, ww in zip(rho, wr):
        total += ww * rr * rr * np.sum(wu * np.exp(1j * rr * xu - 0.5 * rr * rr * q))
    return complex(total) / (2 * math.pi) ** 3


def gaussian_fourier_truncated(A, x, R, *, tol=1e-11, stream: RandomStream | None = None, n_mc=2_000_000):
    """(2 pi)^-r times the integral over |t| <= R of exp(i<t,x> - t^T A t / 2).

    Product quadrature (refined until two levels agree to ``tol``) for r <= 3,
    Monte Carlo in the ball for r >= 4. Returns the real part; the imaginary
    part vanishes by symmetry.
    """
    A = np.asarray(A.entries if isinstance(A, PerturbedIdentityMatrix) else A, dtype=np.float64)
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    r = A.shape[0]
    if r <= 3:
        prev = _ball_quadrature(A, x, R, 0)
        for level in range(1, 6):
            cur = _ball_quadrature(A, x, R, level)
            if abs(cur - prev) <= tol:
                return cur.real
            prev = cur
        raise PrecisionFailure(f"ball quadrature did not settle (last change {abs(cur - prev):.2e})")
    rng = (stream or RandomStream(0)).generator()
    g = rng.standard_normal((n_mc, r))
    g /= np.linalg.norm(g, axis=1)[:, None]
    rad = R * rng.uniform(size=n_mc) ** (1.0 / r)
    t = g * rad[:, None]
    vol = math.pi ** (r / 2) / math.gamma(r / 2 + 1) * R**r
    vals = np.cos(t @ x) * np.exp(-0.5 * np.einsum("ni,ij,nj->n", t, A, t))
    return float(vol * vals.mean() / (2 * math.pi) ** r)


# ---------------------------------------------------------------------------
# ordering probabilities


@dataclass(frozen=True)
class MCEstimate:
    value: float
    stderr: float
    n: int
    hits: int
    ties: int = 0


def count_ordered(samples: np.ndarray):
    """(#rows with x1 > x2 > ... > xr strictly, #rows with some equality)."""
    d = samples[:, :-1] - samples[:, 1:]
    ok = np.all(d > 0, axis=1)
    tie = np.any(d == 0, axis=1)
    return int(ok.sum()), int(tie.sum())


def psd_factor(C, tol=1e-8) -> np.ndarray:
    C = np.asarray(C, dtype=np.float64)
    if not np.allclose(C, C.T, atol=1e-12):
        raise InvalidCovariance("matrix is not symmetric")
    w, v = np.linalg.eigh(C)
    scale = max(1.0, float(np.max(np.abs(np.diag(C)))))
    if w.min() < -tol * scale:
        raise InvalidCovariance(f"smallest eigenvalue {w.min():.3e} below tolerance")
    return v * np.sqrt(np.clip(w, 0.0, None))


def ordering_probability_gaussian(C, r=None, N=100_000, stream=None, mean=None, chunk=1 << 16) -> MCEstimate:
    """Monte Carlo P(Z1 > ... > Zr) for Z ~ N(mean, C)."""
    C = np.asarray(C, dtype=np.float64)
    r = C.shape[0] if r is None else r
    if C.shape != (r, r):
        raise ValueError("dimension mismatch")
    factor = psd_factor(C)
    mu = np.zeros(r) if mean is None else np.asarray(mean, dtype=np.float64)
    rng = (stream or RandomStream(0)).generator()
    hits = ties = 0
    done = 0
    while done < N:
        m = min(chunk, N - done)
        z = rng.standard_normal((m, r)) @ factor.T + mu
        h, t = count_ordered(z)
        hits += h
        ties += t
        done += m
    p = hits / N
    return MCEstimate(p, math.sqrt(max(p * (1 - p), 0.0) / N), N, hits, ties)


def scaled_identity_order_integral(kappa: float, r: int) -> float:
    """(2 pi)^(-r/2) times the integral over x1 > ... > xr of exp(-(1+kappa)|x|^2 / 2)."""
    if kappa <= -1:
        raise InvalidScale(f"kappa must exceed -1, got {kappa}")
    return 1.0 / (math.factorial(r) * (1.0 + kappa) ** (r / 2))


def scaled_identity_order_mc(kappa: float, r: int, N: int, stream: RandomStream | None = None,
                             chunk=1 << 16) -> MCEstimate:
    """Monte Carlo of the same integral: E[1{Z1 > ... > Zr} exp(-kappa |Z|^2 / 2)] with Z standard normal."""
    if kappa <= -1:
        raise InvalidScale(f"kappa must exceed -1, got {kappa}")
    rng = (stream or RandomStream(0)).generator()
    s = s2 = 0.0
    hits = done = 0
    while done < N:
        m = min(chunk, N - done)
        z = rng.standard_normal((m, r))
        ok = np.all(z[:, :-1] > z[:, 1:], axis=1)
        v = np.where(ok, np.exp(-0.5 * kappa * np.einsum("ij,ij->i", z, z)), 0.0)
        s += float(v.sum())
        s2 += float((v * v).sum())
        hits += int(ok.sum())
        done += m
    mean = s / N
    var = max(s2 / N - mean * mean, 0.0)
    return MCEstimate(mean, math.sqrt(var / N), N, hits, 0)
