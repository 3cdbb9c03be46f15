"""Zeros of Dirichlet L-functions on the critical line.

L(1/2 + it, chi) is evaluated as q^-s sum_a chi(a) zeta(s, a/q) with an
Euler-Maclaurin evaluation of each Hurwitz zeta value. The Hurwitz table for
one conductor is shared by every character of that conductor during the
sign-change scan; refinement of individual zeros evaluates pointwise.
"""
from __future__ import annotations

import csv
import logging
import math
import os
import re
import tempfile
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.integrate
import scipy.special

from . import kernels
from .characters import DirichletCharacter, build_character_table, conductor_and_inducer
from .errors import (
    IncompleteZeroData,
    MustBePrimitive,
    PrecisionFailure,
    UnsupportedConductor,
    ZeroParseError,
    ZeroValidationError,
)

log = logging.getLogger(__name__)

MAX_CONDUCTOR = 500
MAX_HEIGHT = 1e4
DEFAULT_STEP = 0.05
DEFAULT_ABS_ERROR = 1e-8
COUNT_SLACK = (2.0, 5.0)  # |count - main term| <= 2 log(q T) + 5

_EM_TERMS = 20
_EM_RATIO = 0.4
_B2J = np.array(
    [scipy.special.bernoulli(2 * j)[2 * j] / math.factorial(2 * j) for j in range(1, _EM_TERMS + 1)]
)


# ---------------------------------------------------------------------------
# Gauss sums and root numbers


def _require_primitive(chi: DirichletCharacter):
    if chi.is_principal or not chi.is_primitive:
        raise MustBePrimitive(f"{chi.label()} is not primitive")


def gauss_sum(chi: DirichletCharacter) -> complex:
    _require_primitive(chi)
    q = chi.q
    n = np.arange(1, q + 1)
    return complex(np.sum(chi.values(n) * np.exp(2j * np.pi * n / q)))


@dataclass(frozen=True)
class RootNumberData:
    tau: complex
    epsilon: complex
    parity: int


def root_number(chi: DirichletCharacter) -> RootNumberData:
    tau = gauss_sum(chi)
    a = chi.parity
    eps = tau / ((1j) ** a * math.sqrt(chi.q))
    if abs(abs(eps) - 1.0) > 1e-10:
        raise PrecisionFailure(f"root number of {chi.label()} has modulus {abs(eps)}")
    return RootNumberData(tau, eps, a)


# ---------------------------------------------------------------------------
# Hurwitz zeta on the critical line


def _em_terms_needed(tmax: float) -> int:
    return int(math.ceil((tmax + 2 * _EM_TERMS) / (2 * math.pi * _EM_RATIO))) + 2


def hurwitz_critical(alphas, ts) -> np.ndarray:
    """zeta(1/2 + it, alpha) for every alpha (rows) and t (columns), 0 < alpha <= 1."""
    alphas = np.asarray(alphas, dtype=np.float64)
    ts = np.asarray(ts, dtype=np.float64)
    out = np.empty((alphas.shape[0], ts.shape[0]), dtype=np.complex128)
    if ts.size == 0:
        return out
    order = np.argsort(np.abs(ts))
    block = 256
    for s0 in range(0, ts.shape[0], block):
        idx = order[s0 : s0 + block]
        tb = ts[idx]
        n_terms = _em_terms_needed(float(np.max(np.abs(tb))))
        head = kernels.hurwitz_head(alphas, tb, n_terms)
        out[:, idx] = head + _em_tail(alphas, tb, n_terms)
    return out


def _em_tail(alphas, ts, n_terms):
    s = 0.5 + 1j * ts[None, :]
    X = (n_terms + alphas)[:, None]
    logX = np.log(X)
    xs = np.exp(-s * logX)  # X^-s
    tail = X * xs / (s - 1.0) + 0.5 * xs
    poch = s.copy()
    xpow = xs / X  # X^(-s-1)
    last = None
    for j in range(_EM_TERMS):
        last = _B2J[j] * poch * xpow
        tail = tail + last
        poch = poch * (s + 2 * j + 1) * (s + 2 * j + 2)
        xpow = xpow / (X * X)
    if np.max(np.abs(last)) > 1e-11:
        raise PrecisionFailure(f"Euler-Maclaurin tail did not converge ({np.max(np.abs(last)):.2e})")
    return tail


class HardyZ:
    """Real rotation Z(t) = eps^(-1/2) e^{i theta(t)} L(1/2 + it, chi) for primitive chi."""

    def __init__(self, chi: DirichletCharacter, max_conductor: int = MAX_CONDUCTOR):
        _require_primitive(chi)
        if chi.q > max_conductor:
            raise UnsupportedConductor(f"conductor {chi.q} exceeds {max_conductor}")
        self.chi = chi
        self.q = chi.q
        self.rn = root_number(chi)
        self.rot = 1.0 / np.sqrt(self.rn.epsilon)
        self.residues = np.array([a for a in range(1, self.q + 1) if math.gcd(a, self.q) == 1])
        self.alphas = self.residues / self.q
        self.chi_values = chi.values(self.residues)

    def theta(self, ts):
        ts = np.asarray(ts, dtype=np.float64)
        g = scipy.special.loggamma((0.5 + self.rn.parity + 1j * ts) / 2.0)
        return 0.5 * ts * math.log(self.q / math.pi) + g.imag

    def rotation(self, ts):
        ts = np.asarray(ts, dtype=np.float64)
        s = 0.5 + 1j * ts
        return self.rot * np.exp(1j * self.theta(ts) - s * math.log(self.q))

    def rotated_from_table(self, ts, table):
        """Rotated values given a Hurwitz table whose rows follow ``self.residues``."""
        return self.rotation(ts) * (self.chi_values @ table)

    def rotated(self, ts) -> np.ndarray:
        ts = np.atleast_1d(np.asarray(ts, dtype=np.float64))
        if np.max(np.abs(ts), initial=0.0) > MAX_HEIGHT:
            raise PrecisionFailure(f"|t| beyond {MAX_HEIGHT}")
        return self.rotated_from_table(ts, hurwitz_critical(self.alphas, ts))

    def __call__(self, ts) -> np.ndarray:
        return self.rotated(ts).real

    def l_value(self, ts) -> np.ndarray:
        ts = np.atleast_1d(np.asarray(ts, dtype=np.float64))
        s = 0.5 + 1j * ts
        return np.exp(-s * math.log(self.q)) * (self.chi_values @ hurwitz_critical(self.alphas, ts))


def hardy_z(chi: DirichletCharacter, t: float, with_residual: bool = False):
    """Z_chi(t); optionally also |Im| / |value| of the rotated L-value."""
    v = complex(HardyZ(chi).rotated([t])[0])
    if with_residual:
        return v.real, abs(v.imag) / max(abs(v), 1e-300)
    return v.real


# ---------------------------------------------------------------------------
# counting


def zero_count_expected(q_star: int, T: float) -> float:
    """(T / 2 pi) log(q* T / (2 pi e)); 0 when the log argument is at most 1."""
    arg = q_star * T / (2 * math.pi * math.e)
    if arg <= 1.0:
        return 0.0
    return T / (2 * math.pi) * math.log(arg)


def zero_count_in_range(q_star: int, T: float) -> bool:
    return q_star * T / (2 * math.pi * math.e) > 1.0


def count_slack(q_star: int, T: float, slack=COUNT_SLACK) -> float:
    return slack[0] * math.log(max(q_star * T, 1.0)) + slack[1]


def tail_second_moment(q_star: int, T: float) -> float:
    """(1/2 pi) * integral_T^inf log(q* t / 2 pi) / (1/4 + t^2) dt."""
    # t = T / u maps the tail onto (0, 1] with only a log singularity at u = 0
    c = math.log(q_star * T / (2 * math.pi))

    def f(u):
        return T * (c - math.log(u)) / (0.25 * u * u + T * T)

    val, _ = scipy.integrate.quad(f, 0.0, 1.0, epsrel=1e-10, epsabs=0.0, limit=200)
    return val / (2 * math.pi)


# ---------------------------------------------------------------------------
# zero sets


@dataclass(frozen=True, eq=False)
class ZeroSet:
    conductor: int
    conrey_index: int
    ordinates: np.ndarray = field(repr=False)
    height: float
    abs_error: float
    source: str = "computed"
    flagged: bool = False

    def __post_init__(self):
        o = np.array(self.ordinates, dtype=np.float64)
        if o.size and (np.any(np.diff(o) <= 0) or o[0] <= 0 or o[-1] > self.height):
            raise ZeroValidationError("<memory>", 0, "ordinates must increase strictly within (0, T]")
        if not self.abs_error > 0:
            raise ZeroValidationError("<memory>", 0, "abs_error must be positive")
        o.setflags(write=False)
        object.__setattr__(self, "ordinates", o)

    def __len__(self):
        return self.ordinates.shape[0]

    def truncate(self, T: float) -> "ZeroSet":
        if T >= self.height:
            return self
        return ZeroSet(
            self.conductor, self.conrey_index, self.ordinates[self.ordinates <= T], T,
            self.abs_error, self.source, self.flagged,
        )

    def count_deviation(self) -> float:
        return len(self) - zero_count_expected(self.conductor, self.height)

    def count_ok(self, slack=COUNT_SLACK) -> bool:
        return abs(self.count_deviation()) <= count_slack(self.conductor, self.height, slack)


def _sign_change_brackets(ts, zs):
    s = np.sign(zs)
    idx = np.flatnonzero(s[:-1] * s[1:] < 0)
    exact = np.flatnonzero(zs[1:] == 0.0) + 1
    return idx, exact


def _refine(Z: HardyZ, a, b, fa, fb, abs_error, max_iter=80):
    """Vectorised Illinois iteration on brackets [a, b] with sign(fa) != sign(fb)."""
    a = a.copy(); b = b.copy(); fa = fa.copy(); fb = fb.copy()
    root = 0.5 * (a + b)
    active = np.ones(a.shape[0], dtype=bool)
    prev = root.copy()
    for _ in range(max_iter):
        ii = np.flatnonzero(active)
        if ii.size == 0:
            break
        w = b[ii] - a[ii]
        c = b[ii] - fb[ii] * w / (fb[ii] - fa[ii])
        bad = ~np.isfinite(c) | (c <= np.minimum(a[ii], b[ii])) | (c >= np.maximum(a[ii], b[ii]))
        c = np.where(bad, 0.5 * (a[ii] + b[ii]), c)
        fc = Z(c)
        same = np.sign(fc) == np.sign(fb[ii])
        # Illinois: if the retained end does not move, halve its value
        na = np.where(same, a[ii], b[ii])
        nfa = np.where(same, 0.5 * fa[ii], fb[ii])
        a[ii], fa[ii] = na, nfa
        b[ii], fb[ii] = c, fc
        root[ii] = c
        done = (fc == 0.0) | (np.abs(b[ii] - a[ii]) <= 2 * abs_error)
        close = np.abs(c - prev[ii]) < 0.1 * abs_error
        prev[ii] = c
        cand = ii[close & ~done]
        if cand.size:
            lo = Z(root[cand] - 0.5 * abs_error)
            hi = Z(root[cand] + 0.5 * abs_error)
            ok = np.sign(lo) != np.sign(hi)
            active[cand[ok]] = False
        active[ii[done]] = False
        mid_done = ii[done & (fc != 0.0)]
        root[mid_done] = 0.5 * (a[mid_done] + b[mid_done])
    if active.any():
        raise PrecisionFailure(f"{int(active.sum())} zeros failed to converge")
    return root


def _scan_grid(T, h):
    n = int(math.ceil(T / h))
    ts = np.arange(n + 1) * h
    ts[-1] = min(ts[-1], T) if n else 0.0
    ts = np.unique(np.append(ts[ts <= T], T))
    return ts


def _zeros_from_values(Z: HardyZ, ts, zs, abs_error):
    idx, exact = _sign_change_brackets(ts, zs)
    roots = []
    if idx.size:
        roots.append(_refine(Z, ts[idx], ts[idx + 1], zs[idx], zs[idx + 1], abs_error))
    if exact.size:
        roots.append(ts[exact])
    if not roots:
        return np.empty(0)
    r = np.sort(np.concatenate(roots))
    return r[r > 0]


def find_zeros(chi: DirichletCharacter, T: float, step=DEFAULT_STEP, abs_error=DEFAULT_ABS_ERROR,
               slack=COUNT_SLACK, _table=None) -> ZeroSet:
    """All sign changes of Z_chi on (0, T], refined to ``abs_error``."""
    Z = HardyZ(chi)
    if T <= 0 or T < step:
        return ZeroSet(chi.q, chi.conrey_index, np.empty(0), max(T, 1e-300), abs_error)
    ts = _scan_grid(T, step)
    if _table is None:
        zs = Z(ts)
    else:
        zs = Z.rotated_from_table(ts, _table).real
    roots = _zeros_from_values(Z, ts, zs, abs_error)
    expected = zero_count_expected(chi.q, T)
    flagged = False
    if roots.size < expected - count_slack(chi.q, T, slack):
        log.info("rescanning %s at step %g", chi.label(), step / 4)
        ts = _scan_grid(T, step / 4)
        roots = _zeros_from_values(Z, ts, Z(ts), abs_error)
        flagged = roots.size < expected - count_slack(chi.q, T, slack)
        if flagged:
            log.warning("possible missed zeros for %s below %g", chi.label(), T)
    roots = roots[roots <= T]
    return ZeroSet(chi.q, chi.conrey_index, roots, float(T), abs_error, "computed", flagged)


def find_zeros_for_conductor(chars, T, step=DEFAULT_STEP, abs_error=DEFAULT_ABS_ERROR, workers=1):
    """ZeroSets for several primitive characters of one conductor, sharing the scan table."""
    chars = list(chars)
    if not chars:
        return {}
    q = chars[0].q
    assert all(c.q == q for c in chars)
    ts = _scan_grid(T, step) if T >= step else None
    table = None
    if ts is not None:
        Z0 = HardyZ(chars[0])
        table = hurwitz_critical(Z0.alphas, ts)

    def one(chi):
        return chi.conrey_index, find_zeros(chi, T, step, abs_error, _table=table)

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            return dict(ex.map(one, chars))
    return dict(map(one, chars))


# ---------------------------------------------------------------------------
# file format

HEADER = ["conductor", "conrey_index", "ordinate", "abs_error"]
_NAME = re.compile(r"chi(\d+)_T([0-9.eE+-]+)\.csv$")


def height_tag(T: float) -> str:
    return f"{T:g}"


def zero_path(root, conductor: int, index: int, T: float) -> Path:
    return Path(root) / "zeros" / f"q{conductor}" / f"chi{index}_T{height_tag(T)}.csv"


def export_zeros(zs: ZeroSet, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    with os.fdopen(fd, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HEADER)
        err = repr(float(zs.abs_error))
        for g in zs.ordinates:
            w.writerow([zs.conductor, zs.conrey_index, repr(float(g)), err])
    os.replace(tmp, path)
    return path


def import_zeros(path, height: float | None = None, conductor=None, conrey_index=None) -> ZeroSet:
    """Read a zero file; the height comes from ``height`` or the file name."""
    path = Path(path)
    m = _NAME.search(path.name)
    if height is None:
        if not m:
            raise ZeroParseError(path, 0, "height not given and not encoded in the file name")
        height = float(m.group(2))
    ords = []
    cond = conductor
    idx = conrey_index if conrey_index is not None else (int(m.group(1)) if m else None)
    err = None
    with open(path, encoding="utf-8", newline="") as fh:
        rows = csv.reader(fh)
        try:
            head = next(rows)
        except StopIteration:
            raise ZeroParseError(path, 1, "empty file") from None
        if [h.strip() for h in head] != HEADER:
            raise ZeroParseError(path, 1, f"bad header {head}")
        for lineno, row in enumerate(rows, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise ZeroParseError(path, lineno, f"expected 4 fields, got {len(row)}")
            try:
                c, i, g, e = int(row[0]), int(row[1]), float(row[2]), float(row[3])
            except ValueError as exc:
                raise ZeroParseError(path, lineno, str(exc)) from None
            if not (math.isfinite(g) and math.isfinite(e)):
                raise ZeroParseError(path, lineno, "non-finite value")
            if cond is None:
                cond = c
            if idx is None:
                idx = i
            if c != cond or i != idx:
                raise ZeroValidationError(path, lineno, "mixed characters in one file")
            if g <= 0 or g > height:
                raise ZeroValidationError(path, lineno, f"ordinate {g} outside (0, {height}]")
            if ords and g <= ords[-1]:
                raise ZeroValidationError(path, lineno, f"ordinate {g} not above {ords[-1]}")
            if e <= 0:
                raise ZeroValidationError(path, lineno, "abs_error must be positive")
            err = e if err is None else max(err, e)
            ords.append(g)
    if cond is None:
        parent = re.match(r"q(\d+)$", path.parent.name)
        cond = int(parent.group(1)) if parent else 0
    if idx is None:
        idx = 0
    return ZeroSet(cond, idx, np.array(ords), float(height), err or DEFAULT_ABS_ERROR, "imported")


# ---------------------------------------------------------------------------
# on-disk cache


def default_zero_dir() -> Path:
    env = os.environ.get("RACE_ZERO_DIR")
    if env:
        return Path(env)
    return Path.home() / ".cache" / "primerace"


class ZeroStore:
    """Zero files under ``root/zeros/q{conductor}/chi{index}_T{height}.csv``.

    Lookups reuse any file computed to at least the requested height with an
    error bound no larger than requested; misses are computed and written.
    """

    def __init__(self, root=None, step=DEFAULT_STEP, abs_error=DEFAULT_ABS_ERROR, workers=1, compute=True):
        self.root = Path(root) if root is not None else default_zero_dir()
        self.step = step
        self.abs_error = abs_error
        self.workers = workers
        self.compute = compute
        self._lock = threading.Lock()
        self._mem: dict = {}

    def candidates(self, conductor: int, index: int):
        d = self.root / "zeros" / f"q{conductor}"
        out = []
        if d.is_dir():
            for p in d.iterdir():
                m = _NAME.fullmatch(p.name)
                if m and int(m.group(1)) == index:
                    out.append((float(m.group(2)), p))
        return sorted(out)

    def lookup(self, conductor: int, index: int, T: float):
        key = (conductor, index)
        hit = self._mem.get(key)
        if hit is not None and hit.height >= T and hit.abs_error <= self.abs_error:
            return hit.truncate(T)
        for h, p in self.candidates(conductor, index):
            if h >= T:
                zs = import_zeros(p, height=h, conductor=conductor, conrey_index=index)
                if zs.abs_error <= self.abs_error:
                    zs = ZeroSet(zs.conductor, zs.conrey_index, zs.ordinates, zs.height,
                                 zs.abs_error, "computed", zs.flagged)
                    self._mem[key] = zs
                    return zs.truncate(T)
        return None

    def store(self, zs: ZeroSet):
        with self._lock:
            export_zeros(zs, zero_path(self.root, zs.conductor, zs.conrey_index, zs.height))
            self._mem[(zs.conductor, zs.conrey_index)] = zs

    def primitive(self, chars, T: float) -> dict:
        """ZeroSets for primitive characters, keyed by (conductor, index)."""
        out = {}
        missing: dict[int, list] = {}
        for chi in chars:
            zs = self.lookup(chi.q, chi.conrey_index, T)
            if zs is None:
                missing.setdefault(chi.q, []).append(chi)
            else:
                out[(chi.q, chi.conrey_index)] = zs
        if missing and not self.compute:
            raise IncompleteZeroData([f"{c.label()}" for cs in missing.values() for c in cs])
        for cond, cs in sorted(missing.items()):
            log.info("computing zeros for %d characters of conductor %d to T=%g", len(cs), cond, T)
            got = find_zeros_for_conductor(cs, T, self.step, self.abs_error, self.workers)
            for idx, zs in got.items():
                self.store(zs)
                out[(cond, idx)] = zs
        return out

    def for_modulus(self, q: int, T: float) -> dict:
        """Zero sets for every nontrivial character mod q, keyed by Conrey index mod q."""
        table = build_character_table(q)
        inducers = {chi.conrey_index: conductor_and_inducer(chi)[1] for chi in table.nontrivial}
        prim = self.primitive(inducers.values(), T)
        return {m: prim[(p.q, p.conrey_index)] for m, p in inducers.items()}
