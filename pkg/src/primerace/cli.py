"""Command-line interface.

Exit codes: 0 success, 1 a check failed, 2 usage error, 3 data error.
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import shutil
import sys
from pathlib import Path

import numpy as np

from . import density as dn
from . import empirical as emp
from . import racemodel as rm
from . import svg
from .characters import RaceSpec, build_character_table, character, conductor_and_inducer
from .config import ConfigError, RunConfig, load_config
from .errors import (
    IncompleteZeroData,
    InvalidClass,
    InvalidComparison,
    InvalidModulus,
    InvalidPair,
    MustBePrimitive,
    QTooSmall,
    RaceError,
    ZeroFileError,
)
from .lzeros import HardyZ, ZeroSet, ZeroStore, count_slack, import_zeros, zero_count_expected, zero_path
from .numerics import RandomStream
from .spectrum import covariance_data
from .verify import run_verify

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_DATA = 0, 1, 2, 3
log = logging.getLogger("primerace")


class UsageError(RaceError):
    pass


# ---------------------------------------------------------------------------
# helpers


def _classes(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.replace(" ", "").split(",") if v)
    except ValueError:
        raise argparse.ArgumentTypeError(f"classes must be comma-separated integers, got {text!r}") from None


def _number(text: str) -> int:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if v != int(v):
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    return int(v)


def _store(cfg: RunConfig, args) -> ZeroStore:
    return ZeroStore(cfg.resolved_zero_dir(), step=cfg.step, abs_error=cfg.abs_error,
                     workers=getattr(args, "workers", 1) or 1)


def _header(cfg: RunConfig, **extra) -> str:
    items = {"config_hash": cfg.hash(), "seed": cfg.seed, **extra}
    return "# " + " ".join(f"{k}={v}" for k, v in items.items()) + "\n"


def _emit(text: str, path: str | None):
    if path:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _csv(rows, fields) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for r in rows:
        w.writerow({k: _cell(v) for k, v in r.items()})
    return buf.getvalue()


def _cell(v):
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else str(v)
    return v


def _model(cfg, args, q, classes=None):
    """Random model over every reduced class mod q (so one batch serves every sub-race)."""
    T = cfg.height_for(q)
    zeros = _store(cfg, args).for_modulus(q, T)
    classes = classes or tuple(build_character_table(q).modulus.residues())
    return rm.build_model(RaceSpec(q, classes), zeros, T), zeros, T


# ---------------------------------------------------------------------------
# zeros


def _inducers(q):
    table = build_character_table(q)
    seen = {}
    for chi in table.nontrivial:
        prim = conductor_and_inducer(chi)[1]
        seen[(prim.q, prim.conrey_index)] = prim
    return [seen[k] for k in sorted(seen)]


def cmd_zeros(cfg, args) -> int:
    store = _store(cfg, args)
    if args.action == "compute":
        q = args.q
        T = cfg.height_for(q)
        prims = _inducers(q)
        got = store.primitive(prims, T)
        rows = []
        for (cond, idx), zs in sorted(got.items()):
            rows.append({"conductor": cond, "conrey_index": idx, "height": T, "count": len(zs),
                         "expected": round(zero_count_expected(cond, T), 3),
                         "deviation": round(zs.count_deviation(), 3), "flagged": int(zs.flagged),
                         "path": str(zero_path(store.root, cond, idx, zs.height))})
        _emit(_csv(rows, list(rows[0]) if rows else ["conductor"]), None)
        return EXIT_OK
    if args.action == "import":
        src = Path(args.file)
        zs = import_zeros(src, height=args.height)
        chi = character(zs.conductor, zs.conrey_index)
        if not chi.is_primitive:
            raise MustBePrimitive(f"{chi.label()} is not primitive")
        ok = zs.count_ok((cfg.slack_log, cfg.slack_const))
        dst = zero_path(store.root, zs.conductor, zs.conrey_index, zs.height)
        dst.parent.mkdir(parents=True, exist_ok=True)
        if src.resolve() != dst.resolve():
            shutil.copyfile(src, dst)
        print(f"{'PASS' if ok else 'FAIL'} {chi.label()} count={len(zs)} deviation={zs.count_deviation():.3f} -> {dst}")
        return EXIT_OK if ok else EXIT_CHECK
    # verify
    q = args.q
    T = cfg.height_for(q)
    failed = False
    for prim in _inducers(q):
        label = prim.label()
        cands = [(h, p) for h, p in store.candidates(prim.q, prim.conrey_index) if h >= T]
        if not cands:
            print(f"FAIL {label} no zero file with height >= {T:g}")
            failed = True
            continue
        h, path = cands[0]
        try:
            zs = import_zeros(path, height=h, conductor=prim.q, conrey_index=prim.conrey_index)
        except ZeroFileError as exc:
            print(f"FAIL {label} {exc}")
            failed = True
            continue
        dev = zs.count_deviation()
        slack = count_slack(zs.conductor, zs.height, (cfg.slack_log, cfg.slack_const))
        ok = abs(dev) <= slack
        detail = f"count={len(zs)} deviation={dev:.3f} slack={slack:.3f}"
        if ok and args.deep:
            bad = _sign_check(prim, zs)
            ok = not bad
            detail += f" sign_changes_missing={len(bad)}"
            if bad:
                detail += f" first_line={bad[0] + 2}"
        print(f"{'PASS' if ok else 'FAIL'} {label} {detail} file={path}")
        failed |= not ok
    return EXIT_CHECK if failed else EXIT_OK


def _sign_check(chi, zs: ZeroSet) -> list[int]:
    """Indices of ordinates without a sign change of Z across [g - err, g + err]."""
    hz = HardyZ(chi)
    g = zs.ordinates
    err = max(zs.abs_error, 1e-10)
    lo = np.asarray(hz(g - err))
    hi = np.asarray(hz(g + err))
    return [int(i) for i in np.flatnonzero(np.sign(lo) == np.sign(hi))]


# ---------------------------------------------------------------------------
# covariance and densities


def cmd_covariance(cfg, args) -> int:
    q = args.q
    T = cfg.height_for(q)
    zeros = _store(cfg, args).for_modulus(q, T)
    cov = covariance_data(RaceSpec(q, args.classes), zeros, T, tail_correction=not args.no_tail)
    _emit(_header(cfg, T=f"{T:g}") + cov.to_csv(), args.output)
    return EXIT_OK


DENSITY_FIELDS = ["q", "classes", "method", "value", "uncertainty", "T", "N", "seed", "config_hash", "c", "note"]


def _row(cfg, est_or_none, spec, method, T, N, note="", value=None, unc=None):
    if est_or_none is not None:
        value, unc = est_or_none.value, est_or_none.uncertainty
    return {"q": spec.q, "classes": " ".join(map(str, spec.classes)), "method": method,
            "value": value if value is not None else "", "uncertainty": unc if unc is not None else "",
            "T": f"{T:g}" if T is not None else "", "N": N if N is not None else "", "seed": cfg.seed,
            "config_hash": cfg.hash(), "c": cfg.theorem_c, "note": note}


def density_rows(cfg, args, method) -> tuple[list, object, object]:
    q = args.q
    spec = RaceSpec(q, args.classes)
    rows = []
    batch = None
    need_model = method in ("mc", "invert2", "gauss", "all")
    if need_model:
        model, zeros, T = _model(cfg, args, q)
    else:
        T = None
    N = args.n or cfg.n_samples
    if method in ("mc", "all"):
        stream = RandomStream(cfg.seed, q)
        batch = rm.sample_x(model, N, stream, workers=args.workers or 1)
        est = dn.density_from_batch(batch, spec.classes, model)
        rows.append(_row(cfg, est, spec, est.method, T, N, f"ties={est.details['ties']}"))
    if method in ("invert2", "all"):
        if spec.r == 2:
            est = dn.delta_invert_2way(model, *spec.classes)
            rows.append(_row(cfg, est, spec, est.method, T, None))
        elif method == "invert2":
            raise UsageError("invert2 needs exactly two classes")
        else:
            rows.append(_row(cfg, None, spec, "inversion-2way", T, None, "needs r=2"))
    if method in ("gauss", "all"):
        cov = covariance_data(spec, zeros, T)
        est = dn.delta_gauss(cov, N, RandomStream(cfg.seed, 10_000 + q))
        rows.append(_row(cfg, est, spec, est.method, T, N, f"epsilon={cov.epsilon:.4g}"))
    if method in ("asymptotic", "all"):
        a11 = dn.delta_asymptotic_t11(q, spec.r, cfg.theorem_c)
        rows.append(_row(cfg, None, spec, "asymptotic-T11", None, None,
                         f"relative_envelope={a11.envelope:.4g} in_range={int(a11.in_range)}",
                         value=a11.main, unc=a11.main * a11.envelope))
        a12 = dn.delta_asymptotic_t12(q, spec.r, cfg.theorem_c)
        rows.append(_row(cfg, None, spec, "asymptotic-T12", None, None,
                         f"log_main={a12.main:.6g} log_envelope={a12.envelope:.4g} in_range={int(a12.in_range)}",
                         value=min(1.0, math.exp(a12.main)), unc=""))
        try:
            ub = dn.delta_upper_t13(q, spec.r, 0.5, cfg.theorem_c)
            rows.append(_row(cfg, None, spec, "upper-bound-T13", None, None,
                             f"s={ub.s} log_bound={ub.log_bound:.6g} in_range={int(ub.in_range)}",
                             value=ub.bound, unc=""))
        except QTooSmall as exc:
            rows.append(_row(cfg, None, spec, "upper-bound-T13", None, None, str(exc)))
    return rows, batch, spec


def cmd_density(cfg, args) -> int:
    rows, batch, spec = density_rows(cfg, args, args.method)
    _emit(_csv(rows, DENSITY_FIELDS), args.output)
    if args.svg and batch is not None:
        shown = batch.columns(spec.classes)[: min(batch.n, 200_000)]
        meta = f"config_hash={cfg.hash()} seed={cfg.seed}"
        _emit(svg.histogram(shown, [f"X(q,{a})" for a in spec.classes], title=f"random model, q={spec.q}", meta=meta),
              args.svg)
    return EXIT_OK


# ---------------------------------------------------------------------------
# prime races


def _race(cfg, args):
    spec = RaceSpec(args.q, args.classes)
    series = emp.sieve_checkpoints(args.q, args.xmax, grid=args.grid, all_primes=args.exact)
    est = emp.empirical_log_density(series, spec)
    return spec, series, est


def cmd_race(cfg, args) -> int:
    spec, series, est = _race(cfg, args)
    out = Path(args.out_dir or cfg.out_dir)
    stem = f"race_q{spec.q}_{'-'.join(map(str, spec.classes))}_x{args.xmax}"
    hdr = _header(cfg, q=spec.q, x_max=args.xmax, grid=series.x.size)
    _emit(hdr + series.to_csv(), str(out / f"{stem}.csv"))
    xs = series.x
    E = emp.e_trajectories(series, spec)
    keep = xs >= 100
    meta = f"config_hash={cfg.hash()} seed={cfg.seed}"
    _emit(svg.line_plot({f"E(x;{spec.q},{a})": (xs[keep], E[keep, j]) for j, a in enumerate(spec.classes)},
                        title=f"normalized error terms, q={spec.q}", xlabel="x", ylabel="E", logx=True,
                        hlines=(0.0,), meta=meta), str(out / f"{stem}_E.svg"))
    rx, rv = emp.running_log_density(series, spec)
    k2 = rx >= 100
    _emit(svg.line_plot({"log density": (rx[k2], rv[k2])}, title=f"running log density {spec}", xlabel="x",
                        ylabel="density", logx=True, meta=meta), str(out / f"{stem}_density.svg"))
    row = {"q": spec.q, "classes": " ".join(map(str, spec.classes)), "x_max": est.x_max, "value": est.value,
           "lower": est.lower, "upper": est.upper, "flips": est.flips, "tie_mass": est.ties,
           "grid_points": est.grid_points, "seed": cfg.seed, "config_hash": cfg.hash()}
    _emit(_csv([row], list(row)), None)
    return EXIT_OK


# ---------------------------------------------------------------------------
# suite and report


def cmd_verify(cfg, args) -> int:
    text, ok = run_verify(cfg, _store(cfg, args), sections=args.only or None)
    _emit(text, args.output)
    if args.output:
        sys.stdout.write(text)
    return EXIT_OK if ok else EXIT_CHECK


def cmd_report(cfg, args) -> int:
    args.method = "all"
    rows, _, spec = density_rows(cfg, args, "all")
    lines = [f"# race {spec}", _header(cfg).rstrip(), "", f"{'method':<18}{'value':>12}{'uncertainty':>14}  note"]
    for r in rows:
        v = r["value"]
        u = r["uncertainty"]
        vs = f"{v:.6f}" if isinstance(v, float) else str(v)
        us = f"{u:.2e}" if isinstance(u, float) else str(u)
        lines.append(f"{r['method']:<18}{vs:>12}{us:>14}  {r['note']}")
    if args.xmax:
        args.grid = None
        args.exact = False
        _, _, est = _race(cfg, args)
        lines.append(f"{'primes to ' + format(args.xmax, 'g'):<18}{est.value:>12.6f}{est.upper - est.lower:>14.2e}  "
                     f"log density, lower={est.lower:.6f} upper={est.upper:.6f}")
    _emit("\n".join(lines) + "\n", args.output)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="primerace", description="Prime number races: random-model densities and sieving.")
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--zero-dir", help="zero data directory (default: $RACE_ZERO_DIR or ~/.cache/primerace)")
    p.add_argument("--seed", type=int)
    p.add_argument("--height", type=float, help="zero height T (default depends on q)")
    p.add_argument("--out-dir")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    z = sub.add_parser("zeros", help="compute, import or verify zero files")
    zs = z.add_subparsers(dest="action", required=True)
    zc = zs.add_parser("compute")
    zc.add_argument("--q", type=int, required=True)
    zi = zs.add_parser("import")
    zi.add_argument("file")
    zi.add_argument("--height", type=float, dest="import_height")
    zv = zs.add_parser("verify")
    zv.add_argument("--q", type=int, required=True)
    zv.add_argument("--deep", action="store_true", help="also re-evaluate Z at each ordinate +- abs_error")
    z.set_defaults(func=cmd_zeros)

    c = sub.add_parser("covariance", help="Var(q), B_q and the correlation matrix")
    c.add_argument("--q", type=int, required=True)
    c.add_argument("--classes", type=_classes, required=True)
    c.add_argument("--no-tail", action="store_true", help="omit the tail correction beyond T")
    c.add_argument("--output")
    c.set_defaults(func=cmd_covariance)

    d = sub.add_parser("density", help="densities by one or all engines")
    d.add_argument("method", choices=["mc", "invert2", "gauss", "asymptotic", "all"])
    d.add_argument("--q", type=int, required=True)
    d.add_argument("--classes", type=_classes, required=True)
    d.add_argument("--n", type=_number)
    d.add_argument("--output")
    d.add_argument("--svg", help="write a histogram of the Monte Carlo sample")
    d.set_defaults(func=cmd_density)

    r = sub.add_parser("race", help="race actual primes up to xmax")
    r.add_argument("--q", type=int, required=True)
    r.add_argument("--classes", type=_classes, required=True)
    r.add_argument("--xmax", type=_number, required=True)
    r.add_argument("--grid", type=int, default=emp.DEFAULT_GRID)
    r.add_argument("--exact", action="store_true", help="use every prime as a checkpoint")
    r.add_argument("--out-dir", default=argparse.SUPPRESS)
    r.set_defaults(func=cmd_race)

    v = sub.add_parser("verify-paper", help="run the property suite")
    v.add_argument("--output")
    v.add_argument("--only", nargs="*", help="restrict to these sections")
    v.set_defaults(func=cmd_verify)

    rep = sub.add_parser("report", help="all engines side by side, optionally with a prime race")
    rep.add_argument("--q", type=int, required=True)
    rep.add_argument("--classes", type=_classes, required=True)
    rep.add_argument("--n", type=_number)
    rep.add_argument("--xmax", type=_number)
    rep.add_argument("--output")
    rep.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with status 2 on usage errors
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config, zero_dir=args.zero_dir, seed=args.seed, height=args.height,
                          out_dir=args.out_dir)
        if getattr(args, "n", None):
            cfg = cfg.replace(n_samples=args.n)
        if args.command == "zeros" and args.action == "import":
            args.height = args.import_height
        return args.func(cfg, args)
    except (ConfigError, UsageError, InvalidModulus, InvalidClass, InvalidPair, InvalidComparison,
            MustBePrimitive, QTooSmall) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ZeroFileError, IncompleteZeroData, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except RaceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CHECK
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
