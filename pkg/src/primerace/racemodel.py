"""The limiting random vector X_{q;a_1..a_r} and its Fourier transform.

X(q, a) = -C_q(a) + sum_{chi != chi0} sum_{gamma > 0} 2 Re(chi(a) U_gamma) / sqrt(1/4 + gamma^2)

with one independent uniform phase per (character, ordinate) pair.
"""
from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .characters import RaceSpec, build_character_table, c_q
from .errors import IncompleteZeroData
from .numerics import RandomStream, count_ordered

SAMPLE_BLOCK = 1 << 14
C1_DEFAULT = 0.5


@dataclass(frozen=True, eq=False)
class RaceModel:
    spec: RaceSpec
    weights: np.ndarray = field(repr=False)  # 2 / sqrt(1/4 + gamma^2), grouped by character
    offsets: np.ndarray = field(repr=False)  # group boundaries into weights
    char_values: np.ndarray = field(repr=False)  # [character, class]
    char_indices: tuple[int, ...]
    mean: np.ndarray
    height: float
    zeros: dict = field(repr=False, default=None)

    @property
    def q(self) -> int:
        return self.spec.q

    @property
    def r(self) -> int:
        return self.spec.r

    @property
    def n_phases(self) -> int:
        return int(self.weights.shape[0])

    def with_classes(self, classes) -> "RaceModel":
        return build_model(RaceSpec(self.q, tuple(classes)), self.zeros, self.height)

    def with_mean(self, mean) -> "RaceModel":
        """Same fluctuating part, different constant offset (for degenerate-limit checks)."""
        return RaceModel(self.spec, self.weights, self.offsets, self.char_values, self.char_indices,
                         np.asarray(mean, dtype=np.float64), self.height, self.zeros)

    def truncated(self, n_per_character: int) -> "RaceModel":
        """Keep only the lowest ``n_per_character`` ordinates of every character."""
        keep = []
        offs = [0]
        for g in range(len(self.offsets) - 1):
            seg = np.arange(self.offsets[g], min(self.offsets[g + 1], self.offsets[g] + n_per_character))
            keep.append(seg)
            offs.append(offs[-1] + seg.size)
        idx = np.concatenate(keep) if keep else np.empty(0, dtype=np.int64)
        return RaceModel(self.spec, self.weights[idx], np.array(offs, dtype=np.int64), self.char_values,
                         self.char_indices, self.mean, self.height, self.zeros)


def build_model(spec: RaceSpec, zeros: dict, T: float | None = None) -> RaceModel:
    """``zeros`` maps nontrivial Conrey indices mod q to ZeroSets of their inducers."""
    table = build_character_table(spec.q)
    missing = [chi.label() for chi in table.nontrivial if chi.conrey_index not in zeros]
    if missing:
        raise IncompleteZeroData(missing)
    if T is None:
        T = min(zeros[chi.conrey_index].height for chi in table.nontrivial)
    ws = []
    offs = [0]
    for chi in table.nontrivial:
        g = zeros[chi.conrey_index].ordinates
        g = g[g <= T]
        ws.append(2.0 / np.sqrt(0.25 + g * g))
        offs.append(offs[-1] + g.size)
    weights = np.concatenate(ws) if ws else np.empty(0)
    if weights.size == 0:
        raise IncompleteZeroData(["no ordinates below the truncation height"])
    vals = np.array([chi.values(spec.classes) for chi in table.nontrivial])
    mean = -np.array([c_q(spec.q, a) for a in spec.classes], dtype=np.float64)
    return RaceModel(spec, weights, np.array(offs, dtype=np.int64), vals,
                     tuple(chi.conrey_index for chi in table.nontrivial), mean, float(T), zeros)


# ---------------------------------------------------------------------------
# sampling


@dataclass(frozen=True, eq=False)
class SampleBatch:
    samples: np.ndarray = field(repr=False)
    classes: tuple[int, ...]
    seed: int
    stream_id: int
    first: int = 0

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    def columns(self, classes) -> np.ndarray:
        pos = {a: j for j, a in enumerate(self.classes)}
        return self.samples[:, [pos[a] for a in classes]]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"x_{a}" for a in self.classes])
        for row in self.samples:
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue()


def sample_x(model: RaceModel, N: int, stream: RandomStream, first: int = 0, workers: int = 1) -> SampleBatch:
    """N draws of X. Sample i uses counters (first + i) * n_phases + j, so any split
    of the range into blocks gives the same numbers."""
    if N < 1:
        raise ValueError("N must be positive")
    key = stream.key
    out = np.empty((N, model.r))
    blocks = [(s, min(SAMPLE_BLOCK, N - s)) for s in range(0, N, SAMPLE_BLOCK)]

    def run(block):
        s, m = block
        S = kernels.phase_sums(model.weights, model.offsets, key, first + s, m)
        # weights already carry the factor 2: X = mean + Re(S @ chi(a))
        out[s : s + m] = model.mean + (S @ model.char_values).real

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(workers) as ex:
            list(ex.map(run, blocks))
    else:
        for b in blocks:
            run(b)
    return SampleBatch(out, model.spec.classes, stream.seed, stream.stream_id, first)


# ---------------------------------------------------------------------------
# Fourier transform


def _amplitudes(model: RaceModel, ts) -> np.ndarray:
    """|sum_j chi(a_j) t_j| per point and character."""
    return np.abs(np.atleast_2d(ts) @ model.char_values.T)


def log_abs_char_function(model: RaceModel, ts) -> tuple[np.ndarray, np.ndarray]:
    """(log |mu^(t)|, sign of the J0 product) for rows of ``ts``; safe against underflow."""
    ts = np.atleast_2d(np.asarray(ts, dtype=np.float64))
    # weights are 2/sqrt(1/4+gamma^2): the J0 argument is amplitude * weight
    return kernels.j0_product(_amplitudes(model, ts), model.weights, model.offsets)


def char_function(model: RaceModel, ts) -> np.ndarray:
    """mu^(t) = exp(i sum C_q(a_j) t_j) prod_chi prod_gamma J0(2|sum chi(a_j) t_j| / sqrt(1/4+gamma^2))."""
    ts = np.asarray(ts, dtype=np.float64)
    single = ts.ndim == 1
    ts2 = np.atleast_2d(ts)
    la, sg = log_abs_char_function(model, ts2)
    phase = np.exp(-1j * (ts2 @ model.mean))  # -mean = C_q(a)
    out = sg * np.exp(la) * phase
    return out[0] if single else out


def empirical_char_function(batch: SampleBatch, ts) -> np.ndarray:
    ts = np.atleast_2d(np.asarray(ts, dtype=np.float64))
    return np.exp(-1j * (batch.samples @ ts.T)).mean(axis=0)


def gaussian_char_check(model: RaceModel, cov, ts) -> float:
    """max over the grid of |mu^(t) / exp(-t^T Cov t / 2) - 1|.

    Points beyond |t| <= Var^(-1/2) log^2 q are skipped with a warning.
    """
    ts = np.atleast_2d(np.asarray(ts, dtype=np.float64))
    lim = cov.var_q ** -0.5 * math.log(model.q) ** 2
    norms = np.linalg.norm(ts, axis=1)
    keep = norms <= lim * (1 + 1e-12)
    if not keep.all():
        warnings.warn(f"{int((~keep).sum())} grid points outside the Gaussian range skipped", stacklevel=2)
    ts = ts[keep]
    if ts.shape[0] == 0:
        return 0.0
    mu = np.atleast_1d(char_function(model, ts))
    gauss = np.exp(-0.5 * np.einsum("ni,ij,nj->n", ts, cov.b_matrix, ts))
    return float(np.max(np.abs(mu / gauss - 1.0)))


# ---------------------------------------------------------------------------
# large deviations


def tail_bound(q: int, r: int, R: float) -> float:
    """2 r exp(-R^2 / (4 phi(q) log q))."""
    phi = build_character_table(q).modulus.phi
    return 2.0 * r * math.exp(-R * R / (4.0 * phi * math.log(q)))


def tail_threshold(q: int) -> float:
    phi = build_character_table(q).modulus.phi
    return math.sqrt(phi * math.log(q))


def tail_bound_applicable(q: int, R: float) -> bool:
    return R >= tail_threshold(q) * (1 - 1e-12)


def empirical_tail(model: RaceModel, N: int, R: float, stream: RandomStream, batch: SampleBatch | None = None) -> float:
    """Monte Carlo frequency of max_j |X_j| > R."""
    if batch is None:
        batch = sample_x(model, N, stream)
    return float(np.mean(np.max(np.abs(batch.samples), axis=1) > R))


# ---------------------------------------------------------------------------
# characters with a large linear form


@dataclass(frozen=True)
class BigCharSet:
    indices: tuple[int, ...]
    floor: float
    floor_applicable: bool
    holds: bool


def big_char_set(spec: RaceSpec, t) -> BigCharSet:
    """Nontrivial chi with |sum_j chi(a_j) t_j| >= |t| / 2, and the phi(q) / (2r) floor."""
    t = np.asarray(t, dtype=np.float64)
    table = build_character_table(spec.q)
    vals = np.array([chi.values(spec.classes) for chi in table.nontrivial])
    amp = np.abs(vals @ t)
    norm = float(np.linalg.norm(t))
    sel = amp >= 0.5 * norm * (1 - 1e-12)
    idx = tuple(chi.conrey_index for chi, s in zip(table.nontrivial, sel) if s)
    phi = table.modulus.phi
    floor = phi / (2.0 * spec.r)
    applicable = 2 <= spec.r <= phi / 4 and norm > 0
    return BigCharSet(idx, floor, applicable, (not applicable) or len(idx) >= floor)


# ---------------------------------------------------------------------------
# decay envelope


def envelope_regime(q: int, norm: float) -> int:
    """1: |t| >= 400, 2: (log q)^-2 <= |t| <= 400, 3: |t| <= (log q)^-2 (boundaries take the tighter)."""
    lo = math.log(q) ** -2
    if norm >= 400:
        return 1
    if norm > lo:
        return 2
    if norm == lo:
        # both 2 and 3 apply; the tighter bound wins
        return 2 if _log_envelope(q, 1, norm, 2) <= _log_envelope(q, 1, norm, 3) else 3
    return 3


def _log_envelope(q, r, norm, regime):
    phi = build_character_table(q).modulus.phi
    lq = math.log(q)
    if regime == 1:
        return -phi * norm / (8.0 * r)
    if regime == 2:
        return -phi / lq**8
    return -0.25 * phi * lq * norm * norm


def log_decay_envelope(q: int, r: int, t) -> float:
    norm = float(np.linalg.norm(np.asarray(t, dtype=np.float64)))
    lo = math.log(q) ** -2
    if norm == 400:
        return min(_log_envelope(q, r, norm, 1), _log_envelope(q, r, norm, 2))
    if norm == lo:
        return min(_log_envelope(q, r, norm, 2), _log_envelope(q, r, norm, 3))
    return _log_envelope(q, r, norm, envelope_regime(q, norm))


def decay_envelope(q: int, r: int, t) -> float:
    return math.exp(log_decay_envelope(q, r, t))


@dataclass(frozen=True)
class EnvelopeReport:
    applicable: bool
    n_points: int
    n_violations: int
    worst_margin: float  # max of log|mu^| - log envelope (negative means every point passes)
    regimes: dict

    @property
    def holds(self) -> bool:
        return self.n_violations == 0


def envelope_check(model: RaceModel, ts, c1: float = C1_DEFAULT) -> EnvelopeReport:
    ts = np.atleast_2d(np.asarray(ts, dtype=np.float64))
    applicable = model.r <= c1 * math.log(model.q)
    if not applicable:
        return EnvelopeReport(False, 0, 0, float("nan"), {})
    la, _ = log_abs_char_function(model, ts)
    env = np.array([log_decay_envelope(model.q, model.r, t) for t in ts])
    margin = la - env
    regimes: dict = {}
    for t in ts:
        k = envelope_regime(model.q, float(np.linalg.norm(t)))
        regimes[k] = regimes.get(k, 0) + 1
    return EnvelopeReport(True, ts.shape[0], int(np.sum(margin > 1e-12)), float(np.max(margin)), regimes)


def log_quadratic_bound(model: RaceModel, ts) -> np.ndarray:
    """-sum_chi sum_gamma |sum_j chi(a_j) t_j|^2 / (1/4 + gamma^2), the bound on log|mu^(t)|
    that |J0(x)| <= exp(-x^2/4) gives while every J0 argument stays in [0, 1]."""
    ts = np.atleast_2d(np.asarray(ts, dtype=np.float64))
    amps = _amplitudes(model, ts)
    w2 = np.add.reduceat(model.weights**2, np.minimum(model.offsets[:-1], model.n_phases - 1))
    w2[model.offsets[:-1] == model.offsets[1:]] = 0.0
    return -0.25 * (amps**2) @ w2


def quadratic_bound_check(model: RaceModel, ts) -> EnvelopeReport:
    """|mu^(t)| <= exp(-sum |sum chi(a_j) t_j|^2 / (1/4 + gamma^2)) at points where all J0 arguments are <= 1."""
    ts = np.atleast_2d(np.asarray(ts, dtype=np.float64))
    amps = _amplitudes(model, ts)
    small = amps.max(axis=1) * float(model.weights.max()) <= 1.0
    ts = ts[small]
    if ts.shape[0] == 0:
        return EnvelopeReport(False, 0, 0, float("nan"), {})
    la, _ = log_abs_char_function(model, ts)
    margin = la - log_quadratic_bound(model, ts)
    return EnvelopeReport(True, ts.shape[0], int(np.sum(margin > 1e-12)), float(np.max(margin)), {3: ts.shape[0]})


def ordered_counts(batch: SampleBatch, classes) -> tuple[int, int]:
    return count_ordered(batch.columns(classes))
