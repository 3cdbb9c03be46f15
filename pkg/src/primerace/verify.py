"""Deterministic property suite over the whole pipeline at desk scale.

Every check reports PASS, FAIL or SKIPPED. Data problems are confined to the
section that needed the data, so a corrupted zero file for one modulus shows
up as failures of that modulus's spectrum checks only.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import racemodel as rm
from ._accel import backend_name
from .characters import RaceSpec, build_character_table, c_q
from .config import RunConfig
from .density import all_orderings, delta_invert_2way, density_from_batch, ordering_decomposition_check
from .errors import RaceError
from .lzeros import ZeroStore
from .numerics import (
    PerturbedIdentityMatrix,
    RandomStream,
    det_perturbed,
    gaussian_density,
    gaussian_fourier_truncated,
    inverse_perturbed,
    scaled_identity_order_integral,
    scaled_identity_order_mc,
)
from .spectrum import b_q, covariance_data, variance_q

PASS, FAIL, SKIPPED = "PASS", "FAIL", "SKIPPED"
SPECTRUM_MODULI = (3, 4, 5, 8)


@dataclass(frozen=True)
class CheckResult:
    section: str
    name: str
    status: str
    detail: str = ""

    def line(self) -> str:
        return f"{self.status:<8}{self.section:<18}{self.name:<34}{self.detail}".rstrip()


def _g(v) -> str:
    return f"{v:.6g}"


class Suite:
    def __init__(self, cfg: RunConfig, store: ZeroStore | None = None):
        self.cfg = cfg
        self.store = store or ZeroStore(cfg.resolved_zero_dir(), step=cfg.step, abs_error=cfg.abs_error)
        self.results: list[CheckResult] = []
        self.root = RandomStream(cfg.seed, 0)

    def add(self, section, name, ok, detail=""):
        status = ok if isinstance(ok, str) else (PASS if ok else FAIL)
        self.results.append(CheckResult(section, name, status, detail))

    def zeros(self, q, T=None):
        return self.store.for_modulus(q, T or self.cfg.height_for(q))

    # -- sections -------------------------------------------------------------

    def characters(self):
        bad = []
        for q in range(3, 31):
            table = build_character_table(q)
            phi = table.modulus.phi
            res = table.modulus.residues()
            for a in res:
                s = sum(chi.value(a) for chi in table)
                want = phi if a == 1 else 0
                if abs(s - want) > 1e-9:
                    bad.append((q, a))
        self.add("characters", "orthogonality q<=30", not bad, f"violations={len(bad)}")

    def spectrum(self, q):
        sec = f"spectrum q={q}"
        try:
            z = self.zeros(q)
        except (RaceError, OSError) as exc:
            self.add(sec, "zero data", FAIL, f"{type(exc).__name__}: {exc}")
            return
        worst = 0.0
        ok = True
        for zs in {(v.conductor, v.conrey_index): v for v in z.values()}.values():
            worst = max(worst, abs(zs.count_deviation()))
            ok &= zs.count_ok((self.cfg.slack_log, self.cfg.slack_const))
        self.add(sec, "zero counts N(T,chi)", ok, f"max|dev|={_g(worst)}")
        T = self.cfg.height_for(q)
        var = variance_q(q, z, T)
        self.add(sec, "Var(q) positive", var > 0 and math.isfinite(var), f"Var={_g(var)}")
        classes = build_character_table(q).modulus.residues()
        sym = 0.0
        resid = 0.0
        over = 0.0
        for i, a in enumerate(classes):
            for b in classes[i + 1 :]:
                v1, r1 = b_q(q, a, b, z, T, return_residual=True)
                v2 = b_q(q, b, a, z, T)
                sym = max(sym, abs(v1 - v2))
                resid = max(resid, r1)
                over = max(over, abs(v1) / var)
        self.add(sec, "B_q symmetric", sym <= 1e-9 * var, f"max|B(a,b)-B(b,a)|={_g(sym)}")
        self.add(sec, "B_q real", resid <= 1e-9 * var, f"max|Im|={_g(resid)}")
        self.add(sec, "|B_q| <= Var(q)", over <= 1 + 1e-12, f"max|B|/Var={_g(over)}")
        try:
            cov = covariance_data(RaceSpec(q, classes), z, T)
            self.add(sec, "covariance PSD", True, f"min eig={_g(cov.min_eigenvalue)}")
        except RaceError as exc:
            self.add(sec, "covariance PSD", FAIL, str(exc))

    def tail_bound(self, q=11, N=20_000):
        sec = "tail bound"
        z = self.zeros(q)
        cls = build_character_table(q).modulus.residues()[:2]
        m = rm.build_model(RaceSpec(q, cls), z, self.cfg.height_for(q))
        batch = rm.sample_x(m, N, self.root.child("tail", q))
        base = rm.tail_threshold(q)
        for c in (1.0, 1.5, 2.0):
            R = c * base
            emp = rm.empirical_tail(m, N, R, None, batch=batch)
            bound = rm.tail_bound(q, m.r, R)
            self.add(sec, f"q={q} c={c:g}", emp <= bound, f"tail={_g(emp)} bound={_g(bound)}")

    def large_char_set(self, per_case=20):
        sec = "large char set"
        rng = self.root.child("charset").generator()
        cases = fails = 0
        for q in range(3, 31):
            table = build_character_table(q)
            phi = table.modulus.phi
            res = table.modulus.residues()
            for r in range(2, min(phi // 4, 6) + 1):
                for _ in range(per_case):
                    cls = tuple(int(v) for v in rng.choice(res, size=r, replace=False))
                    t = rng.normal(size=r)
                    cases += 1
                    fails += not rm.big_char_set(RaceSpec(q, cls), t).holds
        self.add(sec, "floor phi/(2r)", fails == 0, f"cases={cases} failures={fails}")
        gate = rm.big_char_set(RaceSpec(7, (1, 2, 3)), np.array([1.0, -0.5, 0.25]))
        self.add(sec, "r > phi/4 gate", SKIPPED if not gate.floor_applicable else FAIL, "q=7 r=3")

    def matrix_bounds(self, n=200):
        sec = "matrix bounds"
        rng = self.root.child("matrices").generator()
        det_bad = inv_bad = 0
        for k in range(n):
            r = int(rng.integers(2, 13))
            eps = float(rng.uniform(0, 0.5 / r))
            A = PerturbedIdentityMatrix.random(r, eps, rng)
            det_bad += not det_perturbed(A).holds
            inv_bad += not inverse_perturbed(A).holds
        self.add(sec, "|det-1| <= 2(eps r)^2", det_bad == 0, f"n={n} failures={det_bad}")
        self.add(sec, "inverse entry bounds", inv_bad == 0, f"n={n} failures={inv_bad}")

    def gaussian_fourier(self):
        sec = "gaussian fourier"
        rng = self.root.child("gaussfourier").generator()
        A = PerturbedIdentityMatrix.random(2, 0.2, rng)
        for R in (10 * math.sqrt(2), 20.0):
            worst = 0.0
            for x in ([0.0, 0.0], [0.7, -1.2], [2.0, 1.0]):
                worst = max(worst, abs(gaussian_fourier_truncated(A, x, R) - gaussian_density(A.entries, x)))
            bound = 2 * math.exp(-R * R / 5) + 1e-8
            self.add(sec, f"R={_g(R)}", worst <= bound, f"err={worst:.2e} bound={bound:.2e}")

    def order_integral(self, N=200_000):
        sec = "order integral"
        v = scaled_identity_order_integral(0.1, 3)
        est = scaled_identity_order_mc(0.1, 3, N, self.root.child("orderint"))
        ok = abs(est.value - v) <= 3 * est.stderr
        self.add(sec, "kappa=0.1 r=3 vs MC", ok, f"closed={_g(v)} mc={_g(est.value)} se={_g(est.stderr)}")

    def gaussian_approx(self, moduli=(11, 61), n_pts=40):
        sec = "gaussian approx"
        devs = []
        for q in moduli:
            z = self.zeros(q)
            cls = build_character_table(q).modulus.residues()[:2]
            spec = RaceSpec(q, cls)
            T = self.cfg.height_for(q)
            m = rm.build_model(spec, z, T)
            cov = covariance_data(spec, z, T, tail_correction=False)
            rng = self.root.child("gaussapprox").generator()  # same normalized grid for every q
            u = rng.normal(size=(n_pts, 2))
            u *= (rng.uniform(size=n_pts) / np.linalg.norm(u, axis=1))[:, None]
            devs.append(rm.gaussian_char_check(m, cov, u / math.sqrt(cov.var_q)))
        detail = " ".join(f"q={q}:{_g(d)}" for q, d in zip(moduli, devs))
        self.add(sec, "deviation decreases in q", all(b < a for a, b in zip(devs, devs[1:])), detail)

    def decay_envelope(self, q=61, n_pts=200):
        sec = "decay envelope"
        z = self.zeros(q)
        cls = build_character_table(q).modulus.residues()[:2]
        m = rm.build_model(RaceSpec(q, cls), z, self.cfg.height_for(q))
        rng = self.root.child("envelope").generator()
        lo = math.log(q) ** -2
        for name, (a, b) in (("|t|<=(log q)^-2", (0.0, lo)), ("middle", (lo, 400.0)), ("|t|>=400", (400.0, 2000.0))):
            d = rng.normal(size=(n_pts, 2))
            d /= np.linalg.norm(d, axis=1)[:, None]
            ts = d * rng.uniform(a, b, size=n_pts)[:, None]
            rep = rm.envelope_check(m, ts, self.cfg.c1)
            if not rep.applicable:
                self.add(sec, name, SKIPPED, f"r > c1 log q (c1={self.cfg.c1:g})")
            else:
                self.add(sec, name, rep.holds, f"violations={rep.n_violations} margin={_g(rep.worst_margin)}")
            if a == 0.0:
                qb = rm.quadratic_bound_check(m, ts)
                self.add(sec, "|t| small, quadratic form", qb.holds if qb.applicable else SKIPPED,
                         f"violations={qb.n_violations} margin={_g(qb.worst_margin)}")

    def engines(self, q=4, N=100_000):
        sec = "engines r=2"
        z = self.zeros(q)
        cls = build_character_table(q).modulus.residues()
        m = rm.build_model(RaceSpec(q, cls), z, self.cfg.height_for(q))
        batch = rm.sample_x(m, N, self.root.child("engines", q))
        for a in cls:
            for b in cls:
                if a == b:
                    continue
                inv = delta_invert_2way(m, a, b)
                mc = density_from_batch(batch, (a, b), m)
                tol = 3 * mc.uncertainty + 1e-3
                self.add(sec, f"q={q} ({a},{b})", abs(inv.value - mc.value) <= tol,
                         f"inv={_g(inv.value)} mc={_g(mc.value)}")

    def partitions(self, N=20_000):
        sec = "partitions"
        for q, cls, base, ins in ((5, (1, 2, 3), (1, 2), 3), (8, (1, 3, 5, 7), (1, 3, 5), 7)):
            z = self.zeros(q)
            m = rm.build_model(RaceSpec(q, build_character_table(q).modulus.residues()), z, self.cfg.height_for(q))
            batch = rm.sample_x(m, N, self.root.child("partition", q))
            ao = all_orderings(batch, cls)
            self.add(sec, f"q={q} sum over orderings", ao["total"] == ao["n"] - ao["ties"] and ao["ties"] == 0,
                     f"total={ao['total']} n={ao['n']} ties={ao['ties']}")
            rep = ordering_decomposition_check(base, ins, batch)
            self.add(sec, f"q={q} insert {ins}", rep.exact and not rep.flagged,
                     f"base={rep.base_count} sum={sum(rep.insertion_counts.values())} ties={rep.ties}")

    def symmetry(self):
        sec = "symmetry"
        for q, a, b in ((5, 2, 3), (8, 3, 5)):
            if c_q(q, a) != c_q(q, b):
                self.add(sec, f"q={q} ({a},{b})", FAIL, "C_q differ")
                continue
            z = self.zeros(q)
            m = rm.build_model(RaceSpec(q, (a, b)), z, self.cfg.height_for(q))
            v = delta_invert_2way(m).value
            self.add(sec, f"q={q} ({a},{b})", v == 0.5, f"inv={v!r}")

    SECTIONS = ("characters", "spectrum", "tail_bound", "large_char_set", "matrix_bounds", "gaussian_fourier",
                "order_integral", "gaussian_approx", "decay_envelope", "engines", "partitions", "symmetry")

    def run(self, sections=None) -> list[CheckResult]:
        for name in sections or self.SECTIONS:
            if name == "spectrum":
                for q in SPECTRUM_MODULI:
                    self.spectrum(q)
                continue
            try:
                getattr(self, name)()
            except (RaceError, OSError) as exc:
                self.add(name.replace("_", " "), "run", FAIL, f"{type(exc).__name__}: {exc}")
        return self.results


def render(results, cfg: RunConfig) -> str:
    lines = [
        "primerace property suite",
        f"config_hash={cfg.hash()} seed={cfg.seed} backend={backend_name()}",
        "",
    ]
    lines += [r.line() for r in results]
    counts = {s: sum(r.status == s for r in results) for s in (PASS, FAIL, SKIPPED)}
    lines += ["", f"summary: {counts[PASS]} passed, {counts[FAIL]} failed, {counts[SKIPPED]} skipped"]
    return "\n".join(lines) + "\n"


def run_verify(cfg: RunConfig, store: ZeroStore | None = None, sections=None) -> tuple[str, bool]:
    results = Suite(cfg, store).run(sections)
    return render(results, cfg), all(r.status != FAIL for r in results)
