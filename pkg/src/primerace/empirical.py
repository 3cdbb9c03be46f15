"""Races between actual primes: sieve checkpoints, the normalized error vector and log densities."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .characters import Modulus, RaceSpec
from .errors import InvalidComparison, MemoryBudgetExceeded

X_MAX_CEILING = 10**9
DEFAULT_GRID = 4096
GRID_START = 100  # integers below this are all checkpoints
DEFAULT_SEGMENT = 1 << 22
DEFAULT_MEMORY = 256 << 20


def checkpoint_grid(x_max: int, grid: int = DEFAULT_GRID) -> np.ndarray:
    """Every integer in [2, 100) followed by a log-uniform integer grid from 100 to x_max."""
    head = np.arange(2, min(GRID_START, x_max + 1), dtype=np.int64)
    if x_max < GRID_START:
        return head
    tail = np.floor(np.logspace(math.log10(GRID_START), math.log10(x_max), grid)).astype(np.int64)
    tail[-1] = x_max
    return np.unique(np.concatenate([head, tail]))


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    for p in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in (2, 3, 5, 7, 11, 13, 17):  # deterministic far beyond 10^9
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def _small_primes(n: int) -> np.ndarray:
    if n < 2:
        return np.empty(0, dtype=np.int64)
    mask = np.ones(n + 1, dtype=bool)
    mask[:2] = False
    for p in range(2, math.isqrt(n) + 1):
        if mask[p]:
            mask[p * p :: p] = False
    return np.flatnonzero(mask).astype(np.int64)


@dataclass(frozen=True, eq=False)
class PrimeCheckpointSeries:
    q: int
    classes: tuple[int, ...]  # every reduced residue, ascending
    x: np.ndarray = field(repr=False)
    pi_total: np.ndarray = field(repr=False)
    pi_class: np.ndarray = field(repr=False)  # [checkpoint, class]
    ramified: tuple[int, ...] = ()  # primes dividing q
    x_is_prime: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.x_is_prime is None:
            object.__setattr__(self, "x_is_prime", np.array([_is_prime(int(v)) for v in self.x], dtype=bool))

    def constant_cells(self) -> np.ndarray:
        """True for cells [x_k, x_{k+1}) containing no prime, where every count is constant."""
        jumps = np.diff(self.pi_total)
        return (jumps == 0) | ((jumps == 1) & self.x_is_prime[1:])

    @property
    def x_max(self) -> int:
        return int(self.x[-1])

    def column(self, a: int) -> np.ndarray:
        return self.pi_class[:, self.classes.index(a % self.q)]

    def ramified_upto(self, x) -> np.ndarray:
        x = np.asarray(x)
        return sum((x >= p).astype(np.int64) for p in self.ramified) if self.ramified else np.zeros_like(x)

    def partition_ok(self) -> bool:
        return bool(np.all(self.pi_class.sum(axis=1) + self.ramified_upto(self.x) == self.pi_total))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "pi_total"] + [f"pi_{a}" for a in self.classes])
        for k in range(self.x.size):
            w.writerow([int(self.x[k]), int(self.pi_total[k])] + [int(v) for v in self.pi_class[k]])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, q: int, text: str) -> "PrimeCheckpointSeries":
        lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
        rows = list(csv.reader(lines))
        head = rows[0]
        classes = tuple(int(h[3:]) for h in head[2:])
        data = np.array([[int(v) for v in row] for row in rows[1:]], dtype=np.int64)
        ram = tuple(p for p, _ in Modulus.of(q).factorization)
        return cls(q, classes, data[:, 0], data[:, 1], data[:, 2:], ram)


ALL_PRIMES_CEILING = 10**8


def sieve_checkpoints(q: int, x_max: int, grid=None, segment: int = DEFAULT_SEGMENT,
                      memory_budget: int = DEFAULT_MEMORY, all_primes: bool = False) -> PrimeCheckpointSeries:
    """Exact pi(x) and pi(x; q, a) at each checkpoint by a segmented sieve of Eratosthenes.

    ``grid`` is either a point count for :func:`checkpoint_grid` or an explicit
    increasing integer array ending at ``x_max``. ``all_primes`` adds every
    prime up to x_max as a checkpoint, which makes log densities exact.
    """
    x_max = int(x_max)
    if not 2 <= x_max <= X_MAX_CEILING:
        raise ValueError(f"x_max must lie in [2, {X_MAX_CEILING}]")
    mod = Modulus.of(q)
    if grid is None or isinstance(grid, (int, np.integer)):
        xs = checkpoint_grid(x_max, int(grid or DEFAULT_GRID))
    else:
        xs = np.unique(np.asarray(grid, dtype=np.int64))
        if xs[0] < 2 or xs[-1] != x_max:
            raise ValueError("explicit grid must lie in [2, x_max] and end at x_max")
    if all_primes:
        if x_max > ALL_PRIMES_CEILING:
            raise ValueError(f"all_primes is limited to x_max <= {ALL_PRIMES_CEILING}")
        xs = np.union1d(xs, _small_primes(x_max))
    base = _small_primes(math.isqrt(x_max) + 1)
    # a segment costs one bool per integer plus int64 prime offsets (at most one per two integers)
    while segment * 5 > memory_budget:
        segment //= 2
        if segment < max(1 << 12, math.isqrt(x_max)):
            raise MemoryBudgetExceeded(f"cannot sieve to {x_max} within {memory_budget} bytes")
    classes = tuple(mod.residues())
    col = np.full(q, -1, dtype=np.int64)
    col[list(classes)] = np.arange(len(classes))
    running = np.zeros(len(classes), dtype=np.int64)
    running_total = 0
    pi_total = np.empty(xs.size, dtype=np.int64)
    pi_class = np.empty((xs.size, len(classes)), dtype=np.int64)
    is_prime = np.zeros(xs.size, dtype=bool)
    k = 0
    for lo in range(0, x_max + 1, segment):
        hi = min(lo + segment, x_max + 1)
        mask = kernels.sieve_segment(lo, hi, base)
        primes = lo + np.flatnonzero(mask)
        k_end = int(np.searchsorted(xs, hi, side="left"))
        if k_end > k:
            pts = xs[k:k_end]
            is_prime[k:k_end] = mask[pts - lo]
            pi_total[k:k_end] = running_total + np.searchsorted(primes, pts, side="right")
            c = col[primes % q]
            for j in range(len(classes)):
                pj = primes[c == j]
                pi_class[k:k_end, j] = running[j] + np.searchsorted(pj, pts, side="right")
        running_total += primes.size
        running += np.bincount(col[primes % q][col[primes % q] >= 0], minlength=len(classes))
        k = k_end
    ram = tuple(p for p, _ in mod.factorization)
    return PrimeCheckpointSeries(q, classes, xs, pi_total, pi_class, ram, is_prime)


@dataclass(frozen=True)
class EVector:
    x: int
    values: np.ndarray
    on_grid: bool


def e_vector(series: PrimeCheckpointSeries, x, spec: RaceSpec) -> EVector:
    """(log x / sqrt x)(phi(q) pi(x; q, a_j) - pi(x)); off-grid x snaps to the nearest checkpoint."""
    if spec.q != series.q:
        raise InvalidComparison("modulus mismatch")
    k = int(np.argmin(np.abs(series.x - x)))
    xk = int(series.x[k])
    phi = len(series.classes)
    scale = math.log(xk) / math.sqrt(xk)
    vals = np.array([scale * (phi * series.column(a)[k] - series.pi_total[k]) for a in spec.classes], dtype=np.float64)
    return EVector(xk, vals, xk == x)


@dataclass(frozen=True)
class LogDensityEstimate:
    spec: RaceSpec
    x_max: int
    value: float
    lower: float
    upper: float
    grid_points: int
    flips: int
    max_cell: float  # largest Delta log t over the approximate cells
    ties: float  # log-measure of cells where two counts tie at an endpoint

    def __post_init__(self):
        if not self.lower - 1e-15 <= self.value <= self.upper + 1e-15:
            raise ValueError("lower <= value <= upper violated")


def _strict(series, spec, idx) -> np.ndarray:
    cols = np.stack([series.column(a)[idx] for a in spec.classes], axis=1)
    return np.all(cols[:, :-1] > cols[:, 1:], axis=1)


def _tied(series, spec, idx) -> np.ndarray:
    cols = np.stack([series.column(a)[idx] for a in spec.classes], axis=1)
    srt = np.sort(cols, axis=1)
    return np.any(srt[:, 1:] == srt[:, :-1], axis=1)


def empirical_log_density(series: PrimeCheckpointSeries, spec: RaceSpec, x_max=None) -> LogDensityEstimate:
    """(1 / log x_max) times the dt/t measure of {t in [2, x_max] : pi(t; q, a_1) > ... > pi(t; q, a_r)}.

    Cells with no prime inside are exact, since the counts are constant there.
    Other cells contribute fully to ``upper`` when either endpoint satisfies
    the ordering, to ``lower`` when both do, and half to ``value`` when they
    disagree.
    """
    if spec.q != series.q:
        raise InvalidComparison("modulus mismatch")
    xs = series.x
    if x_max is not None:
        xs = xs[xs <= x_max]
    n = xs.size
    x_end = int(xs[-1])
    if n < 2:
        return LogDensityEstimate(spec, x_end, 0.0, 0.0, 0.0, n, 0, 0.0, 0.0)
    s = _strict(series, spec, slice(0, n))
    tie = _tied(series, spec, slice(0, n))
    dlog = np.diff(np.log(xs.astype(np.float64)))
    left, right = s[:-1], s[1:]
    exact = series.constant_cells()[: n - 1]
    both = left & right
    either = left | right
    lower = np.where(exact, left, both)
    upper = np.where(exact, left, either)
    val = np.where(exact, left, 0.5 * (left.astype(float) + right.astype(float)))
    flips_mask = ~exact & (left != right)
    norm = math.log(x_end)
    approx_cells = dlog[~exact]
    return LogDensityEstimate(
        spec, x_end,
        float(np.sum(val * dlog) / norm),
        float(np.sum(lower * dlog) / norm),
        float(np.sum(upper * dlog) / norm),
        n,
        int(flips_mask.sum()),
        float(approx_cells.max()) if approx_cells.size else 0.0,
        float(np.sum(dlog[tie[:-1]]) / norm),
    )


def running_log_density(series: PrimeCheckpointSeries, spec: RaceSpec) -> tuple[np.ndarray, np.ndarray]:
    """Midpoint value of the log density over [2, x_k] for every checkpoint x_k > 2."""
    xs = series.x
    s = _strict(series, spec, slice(None))
    dlog = np.diff(np.log(xs.astype(np.float64)))
    exact = series.constant_cells()
    left, right = s[:-1].astype(float), s[1:].astype(float)
    val = np.where(exact, left, 0.5 * (left + right))
    acc = np.cumsum(val * dlog)
    x = xs[1:]
    return x, acc / np.log(x.astype(np.float64))


def e_trajectories(series: PrimeCheckpointSeries, spec: RaceSpec) -> np.ndarray:
    """E(x; q, a_j) at every checkpoint, shape [checkpoint, r]."""
    x = series.x.astype(np.float64)
    scale = np.log(x) / np.sqrt(x)
    phi = len(series.classes)
    return np.stack([scale * (phi * series.column(a) - series.pi_total) for a in spec.classes], axis=1)


@dataclass(frozen=True)
class ModelComparison:
    spec: RaceSpec
    empirical: float
    empirical_spread: float
    model: float
    model_uncertainty: float
    method: str

    @property
    def difference(self) -> float:
        return abs(self.empirical - self.model)

    def row(self) -> dict:
        return {
            "q": self.spec.q, "classes": " ".join(map(str, self.spec.classes)),
            "empirical": self.empirical, "spread": self.empirical_spread,
            "model": self.model, "model_unc": self.model_uncertainty,
            "method": self.method, "difference": self.difference,
        }


def compare_with_model(emp, model) -> ModelComparison:
    """Tabulate an empirical or model estimate against another for the same ordering. No verdict."""
    spec_a = emp.spec
    spec_b = model.spec
    if spec_a != spec_b:
        raise InvalidComparison(f"{spec_a} vs {spec_b}")
    ev = emp.value
    spread = (emp.upper - emp.lower) if isinstance(emp, LogDensityEstimate) else emp.uncertainty
    return ModelComparison(spec_a, ev, spread, model.value, model.uncertainty, model.method)
