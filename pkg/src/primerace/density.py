"""Densities delta_{q;a_1..a_r} by four engines, and evaluators for the asymptotic statements.

Engines: Monte Carlo over the random model, Fourier inversion of the
difference variable (r = 2), the Gaussian approximation, and the closed-form
asymptotics (1/r!, log-scale main term, large-r upper bound).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import roots_legendre

from . import kernels
from .characters import RaceSpec, c_q
from .errors import InvalidPair, PrecisionFailure, QTooSmall
from .numerics import RandomStream, count_ordered, ordering_probability_gaussian
from .racemodel import RaceModel, SampleBatch, sample_x
from .spectrum import CovarianceData

METHODS = ("monte-carlo", "inversion-2way", "gaussian-approx", "asymptotic-T11", "asymptotic-T12", "upper-bound-T13")
MIN_MC_SAMPLES = 10_000


@dataclass(frozen=True)
class DensityEstimate:
    spec: RaceSpec
    value: float
    method: str
    uncertainty: float
    rigorous: bool = False  # True when ``uncertainty`` is a proven bound rather than a standard error
    height: float | None = None
    source: str = ""
    details: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if not (0.0 <= self.value <= 1.0):
            raise ValueError(f"density {self.value} outside [0, 1]")
        if not self.uncertainty >= 0:
            raise ValueError("uncertainty must be nonnegative")


def _source(model: RaceModel) -> str:
    if model.zeros is None:
        return ""
    return ",".join(sorted({z.source for z in model.zeros.values()}))


# ---------------------------------------------------------------------------
# Monte Carlo


def density_from_batch(batch: SampleBatch, classes, model: RaceModel) -> DensityEstimate:
    """Strict-ordering frequency of ``classes``, any ordered selection of the batch columns."""
    classes = tuple(classes)
    hits, ties = count_ordered(batch.columns(classes))
    n = batch.n
    p = hits / n
    return DensityEstimate(
        RaceSpec(model.q, classes), p, "monte-carlo", math.sqrt(p * (1 - p) / n),
        height=model.height, source=_source(model),
        details={"n": n, "hits": hits, "ties": ties, "seed": batch.seed, "stream": batch.stream_id},
    )


def delta_mc(model: RaceModel, N: int, stream: RandomStream, batch: SampleBatch | None = None) -> DensityEstimate:
    """P(X_1 > ... > X_r) over the model's class order. Ties count as failures and are tallied."""
    if N < MIN_MC_SAMPLES:
        raise ValueError(f"N must be at least {MIN_MC_SAMPLES}")
    if batch is None:
        batch = sample_x(model, N, stream)
    return density_from_batch(batch, model.spec.classes, model)


def all_orderings(batch: SampleBatch, classes) -> dict:
    """Strict hit counts for every permutation of ``classes`` on one batch, plus the tie count."""
    classes = tuple(classes)
    cols = batch.columns(classes)
    counts = {}
    for perm in itertools.permutations(range(len(classes))):
        h, _ = count_ordered(cols[:, perm])
        counts[tuple(classes[p] for p in perm)] = h
    srt = np.sort(cols, axis=1)
    ties = int(np.sum(np.any(srt[:, 1:] == srt[:, :-1], axis=1)))
    return {"counts": counts, "ties": ties, "n": batch.n, "total": sum(counts.values())}


@dataclass(frozen=True)
class DecompositionReport:
    base: tuple
    inserted: int
    base_count: int
    insertion_counts: dict
    ties: int

    @property
    def exact(self) -> bool:
        return self.base_count == sum(self.insertion_counts.values()) + self.ties

    @property
    def flagged(self) -> bool:
        return self.ties > 0


def ordering_decomposition_check(base, inserted: int, batch: SampleBatch) -> DecompositionReport:
    """Count identity: #(a_1 > .. > a_{r-1}) = sum over insertion slots of #(ordering with a_r inserted).

    Rows that satisfy the base ordering but tie a_r with a neighbour are tallied as ties.
    """
    base = tuple(base)
    if inserted in base:
        raise InvalidPair(f"class {inserted} already in {base}")
    cols = batch.columns(base)
    base_mask = np.all(cols[:, :-1] > cols[:, 1:], axis=1) if len(base) > 1 else np.ones(batch.n, bool)
    counts = {}
    for pos in range(len(base) + 1):
        order = base[:pos] + (inserted,) + base[pos:]
        counts[order], _ = count_ordered(batch.columns(order))
    x = batch.columns((inserted,))[:, 0]
    tie_rows = base_mask & np.any(cols == x[:, None], axis=1)
    return DecompositionReport(base, inserted, int(base_mask.sum()), counts, int(tie_rows.sum()))


# ---------------------------------------------------------------------------
# Fourier inversion for r = 2


def _log_j0_envelope(z: np.ndarray) -> np.ndarray:
    """Upper bound for log|J0(z)|: -z^2/4 up to 1, then min(J0(1), sqrt(2/(pi z)))."""
    z = np.abs(z)
    small = -0.25 * z * z
    with np.errstate(divide="ignore"):
        big = np.minimum(math.log(kernels.j0_scalar(1.0)), 0.5 * np.log(2.0 / (math.pi * np.maximum(z, 1e-300))))
    return np.where(z <= 1.0, small, big)


@dataclass(frozen=True)
class _DiffModel:
    shift: float  # C_q(b) - C_q(a)
    amps: np.ndarray  # |chi(a) - chi(b)| per character
    weights: np.ndarray
    offsets: np.ndarray

    def log_envelope(self, t: float) -> float:
        group = np.repeat(np.arange(len(self.amps)), np.diff(self.offsets))
        return float(np.sum(_log_j0_envelope(t * self.amps[group] * self.weights)))

    def product(self, ts: np.ndarray) -> np.ndarray:
        la, sg = kernels.j0_product(np.outer(ts, self.amps), self.weights, self.offsets)
        return sg * np.exp(la)

    def integrand(self, ts: np.ndarray) -> np.ndarray:
        """Im(phi_Y(t)) / t, continued to the value ``shift`` at t = 0."""
        p = self.product(ts)
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.sin(self.shift * ts) / ts * p
        return np.where(ts == 0, self.shift, out)


def _diff_model(model: RaceModel, a: int, b: int) -> _DiffModel:
    pos = {c: j for j, c in enumerate(model.spec.classes)}
    v = model.char_values
    amps = np.abs(v[:, pos[a]] - v[:, pos[b]])
    shift = float(model.mean[pos[a]] - model.mean[pos[b]])  # mean = -C
    return _DiffModel(shift, amps, model.weights, model.offsets)


def cutoff(dm: _DiffModel, level=1e-12) -> float:
    """Point past which the J0 product envelope stays below ``level``.

    Each factor's envelope is nonincreasing in t, so bisection is enough.
    """
    target = math.log(level)
    hi = 1.0
    while dm.log_envelope(hi) > target:
        hi *= 2.0
        if hi > 1e8:
            raise PrecisionFailure("characteristic function envelope does not decay")
    lo = hi / 2 if hi > 1 else 0.0
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        if dm.log_envelope(mid) > target:
            lo = mid
        else:
            hi = mid
    return hi


_GL_CACHE: dict = {}


def _gl(n):
    if n not in _GL_CACHE:
        _GL_CACHE[n] = roots_legendre(n)
    return _GL_CACHE[n]


def _adaptive_gl(f, a, b, tol, n=16, panels=64, max_panels=20000):
    """Composite Gauss-Legendre with per-panel n vs 2n comparison and bisection of bad panels."""
    x1, w1 = _gl(n)
    x2, w2 = _gl(2 * n)
    edges = np.linspace(a, b, panels + 1)
    todo = list(zip(edges[:-1], edges[1:]))
    total = 0.0
    err = 0.0
    evaluated = 0
    while todo:
        lo = np.array([p[0] for p in todo])
        hi = np.array([p[1] for p in todo])
        mid = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)
        pts1 = (mid[:, None] + half[:, None] * x1[None, :]).ravel()
        pts2 = (mid[:, None] + half[:, None] * x2[None, :]).ravel()
        v = f(np.concatenate([pts1, pts2]))
        evaluated += v.size
        v1 = v[: pts1.size].reshape(len(todo), n)
        v2 = v[pts1.size :].reshape(len(todo), 2 * n)
        i1 = half * (v1 @ w1)
        i2 = half * (v2 @ w2)
        diff = np.abs(i2 - i1)
        local_tol = tol * (hi - lo) / (b - a)
        ok = diff <= np.maximum(local_tol, 1e-15 * np.abs(i2))
        total += float(np.sum(i2[ok]))
        err += float(np.sum(diff[ok]))
        nxt = []
        for k in np.flatnonzero(~ok):
            nxt.append((lo[k], mid[k]))
            nxt.append((mid[k], hi[k]))
        todo = nxt
        if evaluated > max_panels * 3 * n:
            raise PrecisionFailure(f"quadrature did not settle after {evaluated} evaluations")
    return total, err, evaluated


def delta_invert_2way(model: RaceModel, a: int | None = None, b: int | None = None, tol=1e-10) -> DensityEstimate:
    """P(X(q,a) > X(q,b)) by P(Y > 0) = 1/2 + (1/pi) int_0^inf Im(phi_Y(t)) / t dt, Y = X_a - X_b.

    ``a`` and ``b`` default to the model's two classes; a model over more
    classes can be reused for any pair.
    """
    if a is None or b is None:
        if model.r != 2:
            raise InvalidPair("give the pair explicitly for models with r != 2")
        a, b = model.spec.classes
    spec = RaceSpec(model.q, (a, b))
    if c_q(model.q, a) == c_q(model.q, b):
        # phi_Y is real and even: the integral vanishes identically
        return DensityEstimate(spec, 0.5, "inversion-2way", 0.0, rigorous=True, height=model.height,
                               source=_source(model), details={"short_circuit": True})
    dm = _diff_model(model, a, b)
    tcut = cutoff(dm)
    integral, err, evals = _adaptive_gl(dm.integrand, 0.0, tcut, tol)
    # the part past t_cut is below the 1e-12 envelope; fold it into the error
    value = 0.5 + integral / math.pi
    unc = (err + 1e-12) / math.pi
    value = min(1.0, max(0.0, value))
    return DensityEstimate(spec, value, "inversion-2way", unc, rigorous=False, height=model.height,
                           source=_source(model), details={"t_cut": tcut, "evaluations": evals})


# ---------------------------------------------------------------------------
# Gaussian approximation


def delta_gauss(cov: CovarianceData, N: int = 1_000_000, stream: RandomStream | None = None,
                with_means=True) -> DensityEstimate:
    """Ordering probability of N(mean / sqrt(Var), correlation); ``with_means=False`` drops the shift."""
    mean = cov.normalized_mean if with_means else np.zeros(cov.spec.r)
    est = ordering_probability_gaussian(cov.correlation, cov.spec.r, N, stream or RandomStream(0, 7), mean=mean)
    return DensityEstimate(cov.spec, est.value, "gaussian-approx", est.stderr, height=cov.height,
                           details={"n": est.n, "hits": est.hits, "ties": est.ties, "with_means": with_means})


# ---------------------------------------------------------------------------
# asymptotic evaluators


@dataclass(frozen=True)
class AsymptoticValue:
    q: int
    r: int
    main: float  # density (T11) or log-density (T12) main term
    envelope: float
    in_range: bool
    log_scale: bool

    @property
    def lower(self) -> float:
        return self.main - self.envelope if self.log_scale else self.main * (1 - self.envelope)

    @property
    def upper(self) -> float:
        return self.main + self.envelope if self.log_scale else self.main * (1 + self.envelope)


def delta_asymptotic_t11(q: int, r: int, c: float = 5.0) -> AsymptoticValue:
    """delta ~ (1/r!)(1 + O(r^2 / log q)); the envelope is c r^2 / log q (relative)."""
    if r < 2 or q < 3:
        raise ValueError("need r >= 2 and q >= 3")
    lq = math.log(q)
    return AsymptoticValue(q, r, 1.0 / math.factorial(r), c * r * r / lq, r <= math.sqrt(lq), False)


def delta_asymptotic_t12(q: int, r: int, c: float = 5.0, eps: float = 0.1) -> AsymptoticValue:
    """log delta = -r log r + r + O(log r + r^2 / log q)."""
    if r < 2 or q < 3:
        raise ValueError("need r >= 2 and q >= 3")
    lq = math.log(q)
    llq = math.log(lq) if lq > 1 else float("nan")
    upper = (1 - eps) * lq / llq if llq > 0 else 0.0
    in_range = math.sqrt(lq) <= r <= upper
    return AsymptoticValue(q, r, -r * math.log(r) + r, c * (math.log(r) + r * r / lq), in_range, True)


@dataclass(frozen=True)
class UpperBound:
    q: int
    r: int
    s: int
    log_bound: float  # unclamped; can exceed 0 when the constant dominates
    in_range: bool

    @property
    def bound(self) -> float:
        return min(1.0, math.exp(min(self.log_bound, 0.0)))


def t13_pivot(q: int, eps: float) -> int:
    lq = math.log(q)
    if lq <= 1:
        raise QTooSmall(f"q={q} too small: log log q <= 0")
    return int(math.floor((1 - eps / 2) * lq / math.log(lq)))


def delta_upper_t13(q: int, r: int, eps: float, c: float = 5.0) -> UpperBound:
    """Upper bound for max delta at any r >= s, from the log-scale main term and envelope at s.

    For r < s the statement says nothing and the trivial bound delta <= 1 is returned.
    """
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    s = t13_pivot(q, eps)
    if s < 2:
        raise QTooSmall(f"q={q}, eps={eps}: pivot s={s} < 2")
    if r < s:
        return UpperBound(q, r, s, 0.0, False)
    v = delta_asymptotic_t12(q, s, c)
    return UpperBound(q, r, s, v.main + v.envelope, True)
