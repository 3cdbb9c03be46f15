"""Mean vector, Var(q), B_q(a, b) and the covariance of the limiting random vector."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .characters import RaceSpec, build_character_table, c_q, conductor_and_inducer, ratio
from .errors import IncompleteZeroData, InvalidCovariance, InvalidPair
from .lzeros import ZeroSet, tail_second_moment


@dataclass(frozen=True)
class CharacterSums:
    """Per nontrivial character mod q: sum over 0 < gamma <= T of 1/(1/4 + gamma^2), and its tail."""

    q: int
    indices: tuple[int, ...]  # Conrey indices mod q, table order
    head: np.ndarray
    tail: np.ndarray
    height: float

    def total(self, tail_correction=True) -> np.ndarray:
        return self.head + self.tail if tail_correction else self.head


def character_sums(q: int, zeros: dict, T: float | None = None) -> CharacterSums:
    """``zeros`` maps each nontrivial Conrey index mod q to the ZeroSet of its inducer."""
    table = build_character_table(q)
    missing = [chi.label() for chi in table.nontrivial if chi.conrey_index not in zeros]
    if missing:
        raise IncompleteZeroData(missing)
    if T is None:
        T = min(zeros[chi.conrey_index].height for chi in table.nontrivial)
    head = []
    tail = []
    for chi in table.nontrivial:
        zs: ZeroSet = zeros[chi.conrey_index]
        if zs.height < T:
            raise IncompleteZeroData([f"{chi.label()} (height {zs.height} < {T})"])
        g = zs.ordinates[zs.ordinates <= T]
        head.append(float(np.sum(1.0 / (0.25 + g * g))))
        tail.append(tail_second_moment(conductor_and_inducer(chi)[0], T))
    return CharacterSums(
        q, tuple(chi.conrey_index for chi in table.nontrivial), np.array(head), np.array(tail), float(T)
    )


def variance_q(q: int, zeros: dict, T: float | None = None, tail_correction=True) -> float:
    """2 * sum over nontrivial chi and 0 < gamma <= T of 1/(1/4 + gamma^2), plus tails."""
    return 2.0 * float(np.sum(character_sums(q, zeros, T).total(tail_correction)))


def _b_from_sums(sums: CharacterSums, a: int, b: int, tail_correction=True) -> complex:
    q = sums.q
    table = build_character_table(q)
    ba = ratio(q, a, b)
    ab = ratio(q, b, a)
    v = np.array([chi.value(ba) + chi.value(ab) for chi in table.nontrivial])
    return complex(np.sum(v * sums.total(tail_correction)))


def b_q(q: int, a: int, b: int, zeros: dict, T: float | None = None, tail_correction=True,
        return_residual=False):
    """B_q(a, b); the imaginary residue of the character sum is dropped (or returned)."""
    if (a - b) % q == 0:
        raise InvalidPair("B_q needs distinct classes; use variance_q for the diagonal")
    val = _b_from_sums(character_sums(q, zeros, T), a, b, tail_correction)
    if return_residual:
        return val.real, abs(val.imag)
    return val.real


@dataclass(frozen=True, eq=False)
class CovarianceData:
    spec: RaceSpec
    var_q: float
    b_matrix: np.ndarray = field(repr=False)
    mean: np.ndarray
    correlation: np.ndarray = field(repr=False)
    height: float
    tail_correction_applied: bool
    epsilon: float  # max off-diagonal |correlation|
    min_eigenvalue: float

    @property
    def q(self) -> int:
        return self.spec.q

    @property
    def normalized_mean(self) -> np.ndarray:
        return self.mean / math.sqrt(self.var_q)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["q", "classes", "T", "tail_correction", "var_q", "epsilon"])
        w.writerow([self.q, " ".join(map(str, self.spec.classes)), f"{self.height:g}",
                    int(self.tail_correction_applied), repr(self.var_q), repr(self.epsilon)])
        w.writerow(["row", "col", "a_row", "a_col", "covariance", "correlation", "mean_row"])
        r = self.spec.r
        for j in range(r):
            for k in range(r):
                w.writerow([j, k, self.spec.classes[j], self.spec.classes[k],
                            repr(float(self.b_matrix[j, k])), repr(float(self.correlation[j, k])),
                            repr(float(self.mean[j]))])
        return buf.getvalue()


def covariance_data(spec: RaceSpec, zeros: dict, T: float | None = None, tail_correction=True,
                    psd_tol=1e-8) -> CovarianceData:
    sums = character_sums(spec.q, zeros, T)
    var = 2.0 * float(np.sum(sums.total(tail_correction)))
    r = spec.r
    B = np.empty((r, r))
    for j in range(r):
        B[j, j] = var
        for k in range(j + 1, r):
            B[j, k] = B[k, j] = _b_from_sums(sums, spec.classes[j], spec.classes[k], tail_correction).real
    corr = B / var
    np.fill_diagonal(corr, 1.0)
    eig = float(np.linalg.eigvalsh(corr).min())
    if eig < -psd_tol:
        raise InvalidCovariance(f"correlation matrix has eigenvalue {eig:.3e}")
    eps = float(np.max(np.abs(corr - np.eye(r))))
    mean = -np.array([c_q(spec.q, a) for a in spec.classes], dtype=np.float64)
    return CovarianceData(spec, var, B, mean, corr, sums.height, tail_correction, eps, eig)
