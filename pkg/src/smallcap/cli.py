"""Command line entry point.

Exit codes: 0 when every audit passes, 1 when any audit fails, 2 on a
configuration or argument error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import bilinear, highlow, sharp
from .engine import (Region, evaluate, moment, profile_to_csv, save_field,
                     streaming_level_areas, theorem_bound)
from .geometry import FrequencySet
from .report import AuditReport, emit
from .sweep import ConfigError, SweepConfig, dyadic_alphas, load_config, run_lqlp_audit, run_sweep

log = logging.getLogger("smallcap")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _config(args):
    cfg = load_config(args.config) if args.config else SweepConfig()
    over = {"out": args.out or cfg.out}
    if args.threads is not None:
        over["threads"] = args.threads
    if args.seed is not None:
        over["seed"] = args.seed
    return replace(cfg, **over).validate()


# ---------------------------------------------------------------------------
# subcommands; each returns a list of reports


def cmd_eval(args, cfg):
    freq = FrequencySet.standard(args.N)
    field = evaluate(freq, Region.square(args.R), cfg.spacing, args.method, n_jobs=cfg.threads)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    save_field(field, out / f"field_N{args.N}_R{args.R:g}.c8")
    m2 = moment(field, 2)
    return [AuditReport("eval", {"N": args.N, "R": args.R, "spacing": cfg.spacing,
                                 "shape": list(field.shape)},
                        measured=m2, bound=float(args.N), fitted_constant=m2 / args.N, passed=True)]


def cmd_moments(args, cfg):
    """Full-period moments [0, N] x [0, N^2] against N and 2N^2 - N."""
    reps = []
    for N in args.N:
        freq = FrequencySet.standard(N)
        field = evaluate(freq, Region(0.0, 0.0, float(N), float(N * N)), cfg.spacing,
                         n_jobs=cfg.threads)
        for p, exact in ((2, N), (4, 2 * N * N - N)):
            m = moment(field, p)
            err = abs(m - exact) / exact
            reps.append(AuditReport(f"moment_{p}", {"N": N, "relative_error": err}, measured=m,
                                    bound=float(exact), fitted_constant=m / exact,
                                    passed=bool(err <= args.tol)))
    return reps


def cmd_levelsets(args, cfg):
    reps = []
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    for N in args.N:
        R = float(N) ** args.s
        alphas = args.alpha or dyadic_alphas(N)
        freq = FrequencySet.standard(N)
        prof = streaming_level_areas(freq, Region.square(R), alphas, cfg.spacing, n_jobs=cfg.threads)
        (out / f"levelsets_N{N}_s{args.s:g}.csv").write_text(profile_to_csv(prof), newline="")
        for a, area in zip(prof.alphas, prof.areas):
            bound, regime = theorem_bound(N, R, a, freq.l2_mass)
            reps.append(AuditReport("superlevel", {"N": N, "s": args.s, "R": R, "alpha": float(a),
                                                   "regime": regime},
                                    measured=float(area), bound=bound, fitted_constant=area / bound,
                                    passed=bool(np.isfinite(area / bound))))
    return reps


def cmd_majorarcs(args, cfg):
    reps = []
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    for N in args.N:
        arcs = sharp.enumerate_major_arcs(N)
        rep, sub, vals, ratio = sharp.arc_amplitude_audit(N, sample=args.sample, seed=cfg.seed)
        (out / f"arcs_N{N}.csv").write_text(sharp.arcs_to_csv(sub, vals, ratio), newline="")
        disjoint = sharp.check_disjoint(arcs)
        reps.append(rep)
        reps.append(AuditReport("arc_disjoint", {"N": N, "n_arcs": len(arcs)},
                                measured=float(len(arcs)), passed=bool(disjoint)))
        if args.oracle:
            brute = sharp.enumerate_major_arcs_bruteforce(N)
            same = sorted((a.q, a.a, a.b) for a in arcs) == sorted(brute)
            reps.append(AuditReport("arc_enumeration", {"N": N}, measured=float(len(arcs)),
                                    bound=float(len(brute)), passed=bool(same)))
    return reps


def cmd_highlow(args, cfg):
    seeds = range(cfg.seed, cfg.seed + args.seeds)
    if args.field == "suite":
        res = highlow.run_suite(tuple(args.R), cfg.beta, seeds=seeds, threads=cfg.threads)
        reps = [r for R in sorted(res) for hl in res[R] for r in hl.reports]
        return reps + highlow.stability_reports(res)
    reps = []
    for R in args.R:
        if args.field == "single_cap":
            tf = highlow.single_cap_field(R, cfg.beta)
        elif args.field == "single_packet":
            tf = highlow.single_packet_field(R, cfg.beta)
        else:
            tf = highlow.random_cap_field(R, cfg.beta, seed=cfg.seed)
        reps += highlow.run_highlow(tf, args.alpha).reports
    return reps


def cmd_bilinear(args, cfg):
    D = Fraction(args.D)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    for S in args.S:
        q = bilinear.count_resonant_quadruples(S, D)
        (out / f"quadruples_S{S}.csv").write_text(q.to_csv(), newline="")
    reps = bilinear.counting_reports(tuple(args.S), D)
    if args.audit_S:
        reps += bilinear.bilinear_reports(tuple(args.audit_S), float(D), seed=cfg.seed)
    return reps


def cmd_sweep(args, cfg):
    return run_sweep(cfg)


def cmd_lqlp(args, cfg):
    return run_lqlp_audit(cfg)


# ---------------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="smallcap", description=__doc__.splitlines()[0])
    p.add_argument("--config", metavar="PATH", help="flat key = value file or JSON object")
    p.add_argument("--out", metavar="DIR", help="output directory (default: reports)")
    p.add_argument("--threads", type=int, metavar="INT", help="worker threads")
    p.add_argument("--seed", type=int, metavar="INT", help="random seed")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("eval", help="sample F on [0, R]^2 and save it")
    s.add_argument("--N", type=int, required=True)
    s.add_argument("--R", type=float, required=True)
    s.add_argument("--method", choices=["auto", "fast", "direct"], default="auto")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("moments", help="full-period second and fourth moments")
    s.add_argument("--N", type=int, nargs="+", default=[4, 8, 16, 32])
    s.add_argument("--tol", type=float, default=1e-6)
    s.set_defaults(func=cmd_moments)

    s = sub.add_parser("levelsets", help="superlevel profile on Q_R with R = N^s")
    s.add_argument("--N", type=int, nargs="+", default=[16])
    s.add_argument("--s", type=float, default=1.5)
    s.add_argument("--alpha", type=float, nargs="*")
    s.set_defaults(func=cmd_levelsets)

    s = sub.add_parser("majorarcs", help="major arcs, disjointness and center amplitudes")
    s.add_argument("--N", type=int, nargs="+", default=[16])
    s.add_argument("--sample", type=int)
    s.add_argument("--oracle", action="store_true", help="compare with brute-force enumeration")
    s.set_defaults(func=cmd_majorarcs)

    s = sub.add_parser("highlow", help="pruning, square functions and lemma audits")
    s.add_argument("--R", type=float, nargs="+", default=[256.0])
    s.add_argument("--field", choices=["single_cap", "single_packet", "random", "suite"], default="random")
    s.add_argument("--alpha", type=float)
    s.add_argument("--seeds", type=int, default=5, help="random fields in the suite")
    s.set_defaults(func=cmd_highlow)

    s = sub.add_parser("bilinear", help="resonant quadruple counting and bilinear audit")
    s.add_argument("--S", type=int, nargs="+", default=[16, 64, 256])
    s.add_argument("--D", type=str, default="1/4")
    s.add_argument("--audit-S", type=int, nargs="*", default=[64, 256])
    s.set_defaults(func=cmd_bilinear)

    s = sub.add_parser("sweep", help="superlevel sweep over N, s and dyadic alpha")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("lqlp", help="mixed-norm audit over the example families")
    s.set_defaults(func=cmd_lqlp)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = _config(args)
        reports = args.func(args, cfg)
    except (ConfigError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    paths = emit(reports, cfg.out, stem=args.command)
    failed = [r for r in reports if not r.passed]
    for r in failed:
        log.warning("FAIL %s %s", r.name, r.parameters)
    print(f"{len(reports)} reports, {len(failed)} failed -> {', '.join(str(p) for p in paths)}")
    return EXIT_FAIL if failed else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
