"""Hot loops, each in a numba flavour and a pure numpy flavour.

The public functions dispatch on :func:`primerace._accel.use_numba`, which is
read at call time so the environment flag can be flipped inside one process
(the benchmark does this). Both flavours compute the same quantities; they are
not guaranteed to agree to the last bit because libm and numpy's SIMD
transcendental functions round differently.
"""
import math

import numpy as np

from ._accel import njit, use_numba

TWO_PI = 2.0 * math.pi

# ---------------------------------------------------------------------------
# counter-based uniforms (SplitMix64 output function applied to a counter)

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0


def mix64(z):
    """SplitMix64 finalizer on uint64 scalars or arrays (wrapping arithmetic)."""
    with np.errstate(over="ignore"):
        z = np.asarray(z, dtype=np.uint64)
        z = (z ^ (z >> _S30)) * _M1
        z = (z ^ (z >> _S27)) * _M2
        return z ^ (z >> _S31)


def uniforms_np(key, counters):
    with np.errstate(over="ignore"):
        x = np.uint64(key) + np.asarray(counters, dtype=np.uint64) * GOLDEN
    return (mix64(x) >> _S11).astype(np.float64) * _INV53


@njit
def _mix64_nb(z):
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@njit
def _uniform_nb(key, counter):
    x = key + counter * np.uint64(0x9E3779B97F4A7C15)
    return np.float64(_mix64_nb(x) >> np.uint64(11)) * (1.0 / 9007199254740992.0)


# ---------------------------------------------------------------------------
# phase sums of the random model:  S[i, g] = sum_{j in group g} w_j exp(i theta_ij)
# theta_ij = 2 pi * U(key, (first + i) * n_phases + j)
#
# exp(i theta) is table lookup on the top 10 bits of U plus a short Taylor
# series in the remaining offset (|delta| < 2 pi / 1024, error below 1e-19).

_TAB_BITS = 10
_TAB = 1 << _TAB_BITS
_PHASE_COS = np.cos(TWO_PI * np.arange(_TAB) / _TAB)
_PHASE_SIN = np.sin(TWO_PI * np.arange(_TAB) / _TAB)
_FRAC_MASK = np.uint64((1 << (53 - _TAB_BITS)) - 1)
_FRAC_SCALE = TWO_PI / (_TAB * float(1 << (53 - _TAB_BITS)))


@njit(nogil=True)
def _phase_sums_nb(weights, offsets, key, first, n, tab_cos, tab_sin):
    n_phases = weights.shape[0]
    n_groups = offsets.shape[0] - 1
    out = np.empty((n, n_groups), dtype=np.complex128)
    for i in range(n):
        base = np.uint64(first + i) * np.uint64(n_phases)
        for g in range(n_groups):
            re = 0.0
            im = 0.0
            for j in range(offsets[g], offsets[g + 1]):
                z = _mix64_nb(key + (base + np.uint64(j)) * np.uint64(0x9E3779B97F4A7C15))
                k = np.int64(z >> np.uint64(64 - 10))
                d = np.float64((z >> np.uint64(11)) & np.uint64(0x7FFFFFFFFFF)) * _FRAC_SCALE
                d2 = d * d
                sd = d * (1.0 - d2 * (1.0 / 6.0 - d2 * (1.0 / 120.0)))
                cd = 1.0 - d2 * (0.5 - d2 * (1.0 / 24.0 - d2 * (1.0 / 720.0)))
                c = tab_cos[k]
                s = tab_sin[k]
                re += weights[j] * (c * cd - s * sd)
                im += weights[j] * (s * cd + c * sd)
            out[i, g] = complex(re, im)
    return out


def _unit_phases_np(key, counters):
    with np.errstate(over="ignore"):
        z = mix64(np.uint64(key) + counters * GOLDEN)
    k = (z >> np.uint64(64 - _TAB_BITS)).astype(np.intp)
    d = ((z >> _S11) & _FRAC_MASK).astype(np.float64) * _FRAC_SCALE
    d2 = d * d
    sd = d * (1.0 - d2 * (1.0 / 6.0 - d2 * (1.0 / 120.0)))
    cd = 1.0 - d2 * (0.5 - d2 * (1.0 / 24.0 - d2 * (1.0 / 720.0)))
    c = _PHASE_COS[k]
    s = _PHASE_SIN[k]
    return c * cd - s * sd, s * cd + c * sd


def _phase_sums_np(weights, offsets, key, first, n):
    n_phases = weights.shape[0]
    n_groups = offsets.shape[0] - 1
    out = np.empty((n, n_groups), dtype=np.complex128)
    if n_phases == 0:
        out[:] = 0
        return out
    chunk = max(1, (1 << 20) // n_phases)
    cols = np.arange(n_phases, dtype=np.uint64)
    starts = np.minimum(offsets[:-1], n_phases - 1)
    empty = offsets[:-1] == offsets[1:]
    for s in range(0, n, chunk):
        m = min(chunk, n - s)
        rows = (np.arange(first + s, first + s + m, dtype=np.uint64) * np.uint64(n_phases))[:, None]
        cos_t, sin_t = _unit_phases_np(key, rows + cols[None, :])
        re = np.add.reduceat(cos_t * weights, starts, axis=1)
        im = np.add.reduceat(sin_t * weights, starts, axis=1)
        block = re + 1j * im
        block[:, empty] = 0
        out[s : s + m] = block
    return out


def phase_sums(weights, offsets, key, first, n):
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    offsets = np.ascontiguousarray(offsets, dtype=np.int64)
    if use_numba():
        return _phase_sums_nb(weights, offsets, np.uint64(key), np.int64(first), int(n), _PHASE_COS, _PHASE_SIN)
    return _phase_sums_np(weights, offsets, np.uint64(key), int(first), int(n))


# ---------------------------------------------------------------------------
# truncated Hurwitz sums  H[a, t] = sum_{k < n_terms} (k + alpha_a)^(-1/2 - i t)


@njit(nogil=True)
def _hurwitz_head_nb(alphas, ts, n_terms):
    out = np.zeros((alphas.shape[0], ts.shape[0]), dtype=np.complex128)
    for a in range(alphas.shape[0]):
        for k in range(n_terms):
            x = k + alphas[a]
            lg = math.log(x)
            amp = 1.0 / math.sqrt(x)
            for j in range(ts.shape[0]):
                ph = ts[j] * lg
                out[a, j] += complex(amp * math.cos(ph), -amp * math.sin(ph))
    return out


def _hurwitz_head_np(alphas, ts, n_terms):
    out = np.zeros((alphas.shape[0], ts.shape[0]), dtype=np.complex128)
    k = np.arange(n_terms, dtype=np.float64)
    for a, alpha in enumerate(alphas):
        x = k + alpha
        lg = np.log(x)
        amp = 1.0 / np.sqrt(x)
        step = max(1, (1 << 20) // max(1, n_terms))
        for s in range(0, ts.shape[0], step):
            ph = np.outer(ts[s : s + step], lg)
            out[a, s : s + step] = np.cos(ph) @ amp - 1j * (np.sin(ph) @ amp)
    return out


def hurwitz_head(alphas, ts, n_terms):
    alphas = np.ascontiguousarray(alphas, dtype=np.float64)
    ts = np.ascontiguousarray(ts, dtype=np.float64)
    if use_numba():
        return _hurwitz_head_nb(alphas, ts, int(n_terms))
    return _hurwitz_head_np(alphas, ts, int(n_terms))


# ---------------------------------------------------------------------------
# Bessel J0: power series |x| <= 8, periodic trapezoid for 8 < |x| <= 25,
# Hankel asymptotic expansion beyond.

_J0_TRAP_NODES = 64
_J0_TRAP_SIN = np.sin((np.arange(_J0_TRAP_NODES) + 0.5) * math.pi / _J0_TRAP_NODES)


def _hankel_coefficients(n):
    # a_k(0) = prod_{j=1..k} (-(2j-1)^2) / (k! 8^k)
    a = np.empty(n)
    a[0] = 1.0
    for k in range(1, n):
        a[k] = a[k - 1] * (-((2 * k - 1) ** 2)) / (k * 8.0)
    return a


_HANKEL = _hankel_coefficients(40)


@njit
def j0_scalar(x):
    ax = abs(x)
    if ax <= 8.0:
        h = 0.25 * ax * ax
        term = 1.0
        s = 1.0
        m = 1
        while m < 60:
            term *= -h / (m * m)
            s += term
            if abs(term) < 1e-18:
                break
            m += 1
        return s
    if ax <= 25.0:
        s = 0.0
        for k in range(_J0_TRAP_NODES):
            s += math.cos(ax * _J0_TRAP_SIN[k])
        return s / _J0_TRAP_NODES
    p = 0.0
    qs = 0.0
    inv = 1.0 / ax
    pw = 1.0
    last = 1e300
    for k in range(_HANKEL.shape[0]):
        term = _HANKEL[k] * pw
        if abs(term) > last:
            break
        last = abs(term)
        if k % 2 == 0:
            p += term if (k // 2) % 2 == 0 else -term
        else:
            qs += term if (k // 2) % 2 == 0 else -term
        if last < 1e-17:
            break
        pw *= inv
    w = ax - 0.25 * math.pi
    return math.sqrt(2.0 / (math.pi * ax)) * (p * math.cos(w) - qs * math.sin(w))


def j0_np(x):
    x = np.abs(np.asarray(x, dtype=np.float64))
    out = np.empty_like(x)
    small = x <= 8.0
    mid = (~small) & (x <= 25.0)
    big = x > 25.0
    if small.any():
        h = 0.25 * x[small] ** 2
        term = np.ones_like(h)
        s = np.ones_like(h)
        for m in range(1, 60):
            term = term * (-h / (m * m))
            s += term
            if np.max(np.abs(term)) < 1e-18:
                break
        out[small] = s
    if mid.any():
        xm = x[mid]
        out[mid] = np.cos(np.multiply.outer(xm, _J0_TRAP_SIN)).mean(axis=-1)
    if big.any():
        xb = x[big]
        inv = 1.0 / xb
        p = np.zeros_like(xb)
        qs = np.zeros_like(xb)
        pw = np.ones_like(xb)
        last = np.full_like(xb, np.inf)
        live = np.ones(xb.shape, dtype=bool)
        for k in range(_HANKEL.shape[0]):
            term = _HANKEL[k] * pw
            live &= np.abs(term) <= last
            sgn = 1.0 if (k // 2) % 2 == 0 else -1.0
            if k % 2 == 0:
                p += np.where(live, sgn * term, 0.0)
            else:
                qs += np.where(live, sgn * term, 0.0)
            last = np.where(live, np.abs(term), last)
            live &= last >= 1e-17
            if not live.any():
                break
            pw = pw * inv
        w = xb - 0.25 * np.pi
        out[big] = np.sqrt(2.0 / (np.pi * xb)) * (p * np.cos(w) - qs * np.sin(w))
    return out


@njit
def _j0_vec_nb(x):
    out = np.empty(x.shape[0])
    for i in range(x.shape[0]):
        out[i] = j0_scalar(x[i])
    return out


def j0(x):
    """Vectorised J0 with the active backend."""
    arr = np.asarray(x, dtype=np.float64)
    if use_numba():
        flat = np.ascontiguousarray(arr.ravel())
        return _j0_vec_nb(flat).reshape(arr.shape)
    return j0_np(arr)


# ---------------------------------------------------------------------------
# products of J0 over a grouped weight list:
#   prod_g prod_{j in g} J0(amp[p, g] * w_j)  returned as (log|.|, sign)


@njit(nogil=True)
def _j0_product_nb(amps, weights, offsets):
    n_pts = amps.shape[0]
    logabs = np.zeros(n_pts)
    sign = np.ones(n_pts)
    for p in range(n_pts):
        la = 0.0
        sg = 1.0
        for g in range(offsets.shape[0] - 1):
            a = amps[p, g]
            if a == 0.0:
                continue
            for j in range(offsets[g], offsets[g + 1]):
                v = j0_scalar(a * weights[j])
                if v == 0.0:
                    la = -np.inf
                    continue
                if v < 0.0:
                    sg = -sg
                la += math.log(abs(v))
        logabs[p] = la
        sign[p] = sg
    return logabs, sign


def _j0_product_np(amps, weights, offsets):
    n_pts = amps.shape[0]
    group = np.repeat(np.arange(offsets.shape[0] - 1), np.diff(offsets))
    logabs = np.zeros(n_pts)
    sign = np.ones(n_pts)
    if weights.shape[0] == 0:
        return logabs, sign
    chunk = max(1, (1 << 21) // weights.shape[0])
    for s in range(0, n_pts, chunk):
        z = amps[s : s + chunk][:, group] * weights[None, :]
        v = j0_np(z)
        with np.errstate(divide="ignore"):
            logabs[s : s + chunk] = np.log(np.abs(v)).sum(axis=1)
        neg = (v < 0).sum(axis=1)
        sign[s : s + chunk] = np.where(neg % 2 == 1, -1.0, 1.0)
    return logabs, sign


def j0_product(amps, weights, offsets):
    amps = np.ascontiguousarray(np.atleast_2d(amps), dtype=np.float64)
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    offsets = np.ascontiguousarray(offsets, dtype=np.int64)
    if use_numba():
        return _j0_product_nb(amps, weights, offsets)
    return _j0_product_np(amps, weights, offsets)


# ---------------------------------------------------------------------------
# segmented sieve: primality mask of [lo, hi) given all primes <= sqrt(hi)


@njit(nogil=True)
def _sieve_segment_nb(lo, hi, base):
    mask = np.ones(hi - lo, dtype=np.bool_)
    for i in range(max(0, 2 - lo)):
        if i < mask.shape[0]:
            mask[i] = False
    for p in base:
        if p * p >= hi:
            break
        start = max(p * p, ((lo + p - 1) // p) * p)
        for m in range(start, hi, p):
            mask[m - lo] = False
    return mask


def _sieve_segment_np(lo, hi, base):
    mask = np.ones(hi - lo, dtype=bool)
    mask[: max(0, min(2 - lo, hi - lo))] = False
    for p in base:
        p = int(p)
        if p * p >= hi:
            break
        start = max(p * p, -(-lo // p) * p)
        mask[start - lo :: p] = False
    return mask


def sieve_segment(lo, hi, base):
    base = np.ascontiguousarray(base, dtype=np.int64)
    if use_numba():
        return _sieve_segment_nb(np.int64(lo), np.int64(hi), base)
    return _sieve_segment_np(int(lo), int(hi), base)
