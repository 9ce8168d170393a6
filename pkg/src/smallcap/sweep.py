"""Parameter sweeps that fit implicit constants across scales."""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .engine import (MAX_SPACING, Region, iter_rows, lq_lp_rhs, lq_lp_rhs_caps, streaming_level_areas,
                     theorem_bound)
from .geometry import FrequencySet
from .report import AuditReport, growth_exponent, skip_record
from .sharp import example_cap_lp_norms, generate_example

__all__ = [
    "SweepConfig",
    "ConfigError",
    "load_config",
    "dyadic_alphas",
    "sweep_cell",
    "run_sweep",
    "lp_norm",
    "run_lqlp_audit",
    "GROWTH_LIMIT",
]

GROWTH_LIMIT = 0.5
GIB = 1 << 30


class ConfigError(ValueError):
    """Raised for invalid configuration values."""


@dataclass
class SweepConfig:
    """Sweep settings; every field can be set from a flat key=value file."""

    N: list = field(default_factory=lambda: [8, 16, 32])
    s: list = field(default_factory=lambda: [1.0, 1.5, 2.0])
    p: list = field(default_factory=lambda: [6.0, 4.0, 6.0])
    q: list = field(default_factory=lambda: [2.0, 4.0, 6.0])
    R: list = field(default_factory=lambda: [256, 1024])
    families: list = field(default_factory=lambda: ["constructive", "block", "square_root", "standard"])
    alpha_policy: str = "dyadic"
    spacing: float = MAX_SPACING
    beta: float = 0.75
    seeds: list = field(default_factory=lambda: list(range(16)))
    memory_budget_gib: float = 4.0
    threads: int = 1
    seed: int = 0
    out: str = "reports"

    def validate(self):
        if not 0 < self.spacing <= MAX_SPACING:
            raise ConfigError(f"spacing must lie in (0, {MAX_SPACING}]")
        for s in self.s:
            if not 1.0 <= s <= 2.0:
                raise ConfigError(f"s={s}: R = N^s must lie in [N, N^2]")
        if any(n < 2 for n in self.N):
            raise ConfigError("N must be >= 2")
        if len(self.p) != len(self.q):
            raise ConfigError("p and q lists must have equal length")
        for p, q in zip(self.p, self.q):
            if math.isinf(q):
                raise ConfigError("q = inf is a degenerate limit and is not audited")
            if 3.0 / p + 1.0 / q > 1 + 1e-12:
                raise ConfigError(f"(p, q) = ({p}, {q}) violates 3/p + 1/q <= 1")
        if self.alpha_policy != "dyadic":
            raise ConfigError("only the dyadic alpha policy is supported")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        bad = set(self.families) - {"constructive", "block", "square_root", "standard"}
        if bad:
            raise ConfigError(f"unknown families {sorted(bad)}")
        return self

    @property
    def pq(self):
        return list(zip(self.p, self.q))

    @classmethod
    def from_mapping(cls, d):
        known = {f.name: f for f in fields(cls)}
        kw = {}
        for k, v in d.items():
            if k not in known:
                raise ConfigError(f"unknown config key {k!r}")
            default = getattr(cls(), k)
            kw[k] = _coerce(k, v, default)
        return cls(**kw).validate()

    def to_dict(self):
        return asdict(self)


def _coerce(key, v, default):
    try:
        if isinstance(default, list):
            items = v if isinstance(v, list) else [x for x in str(v).replace(",", " ").split() if x]
            if default and isinstance(default[0], str):
                return [str(x) for x in items]
            if key in ("N", "R", "seeds"):
                return [int(x) for x in items]
            return [float(x) for x in items]
        if isinstance(default, bool):
            return str(v).lower() in ("1", "true", "yes")
        if isinstance(default, int):
            return int(v)
        if isinstance(default, float):
            return float(v)
        return str(v)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key!r}: {v!r}") from exc


def load_config(path):
    """Read a flat ``key = value`` file (``#`` comments) or a JSON object."""
    text = Path(path).read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON config: {exc}") from exc
    else:
        d = {}
        for n, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {n}: expected key = value")
            k, v = line.split("=", 1)
            d[k.strip()] = v.strip()
    return SweepConfig.from_mapping(d)


# ---------------------------------------------------------------------------
# superlevel sweep


def dyadic_alphas(N):
    """Powers of two in [N^(1/2), N]."""
    lo = math.ceil(0.5 * math.log2(N) - 1e-12)
    hi = math.floor(math.log2(N) + 1e-12)
    return [float(2 ** k) for k in range(lo, hi + 1)]


def _grid_bytes(R, spacing):
    n = int(round(R / spacing))
    return n * n * 16


def sweep_cell(N, s, spacing=MAX_SPACING, memory_budget_gib=4.0):
    """Measure |U_alpha cap Q_R| for every dyadic alpha at one (N, s)."""
    R = float(N) ** s
    alphas = dyadic_alphas(N)
    params = {"N": int(N), "s": float(s), "R": R, "spacing": spacing}
    need = _grid_bytes(R, spacing)
    if need > memory_budget_gib * GIB:
        reason = f"grid needs {need / GIB:.2f} GiB > budget {memory_budget_gib} GiB"
        return [skip_record("superlevel", dict(params, alpha=a), reason) for a in alphas]
    freq = FrequencySet.standard(N)
    prof = streaming_level_areas(freq, Region.square(R), alphas, spacing)
    # |F| <= ||a||_1, so {|F| >= ||a||_1} is a null set: grid hits there are ties
    l1 = float(np.sum(np.abs(freq.coeffs)))
    out = []
    for a, area, budget in zip(prof.alphas, prof.areas, prof.boundary_budget):
        bound, regime = theorem_bound(N, R, a, freq.l2_mass)
        out.append(AuditReport(
            name="superlevel",
            parameters=dict(params, alpha=float(a), regime=regime, boundary_budget=float(budget),
                            null_level_set=bool(a >= l1 * (1 - 1e-12))),
            measured=float(area), bound=float(bound), fitted_constant=float(area / bound),
            passed=bool(np.isfinite(area / bound)),
        ))
    return out


def run_sweep(config):
    """Per-cell reports plus one growth summary per (s, regime).

    C(N) is the largest measured/bound over the alphas of a regime, leaving
    out null level sets (alpha >= ||a||_1). The summary fits the log-log
    slope of C across N, fits C0 at the smallest N and checks
    C(N) <= C0 (N / N0)^GROWTH_LIMIT.
    """
    config.validate()
    jobs = [(N, s) for s in config.s for N in config.N]

    def work(job):
        return sweep_cell(job[0], job[1], config.spacing, config.memory_budget_gib)

    if config.threads == 1:
        results = [work(j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=config.threads) as ex:
            results = list(ex.map(work, jobs))
    cells = [r for res in results for r in res]
    summaries = []
    for s in config.s:
        for regime in (1, 2, 3):
            per_n = {}
            for r in cells:
                pr = r.parameters
                if (r.skipped or pr["s"] != float(s) or pr.get("regime") != regime
                        or pr.get("null_level_set")):
                    continue
                per_n[pr["N"]] = max(per_n.get(pr["N"], 0.0), r.fitted_constant)
            if not per_n:
                continue
            ns = sorted(per_n)
            cs = [per_n[n] for n in ns]
            slope = growth_exponent(ns, cs)
            c0 = cs[0]
            # measured <= C0 (N / N0)^GROWTH_LIMIT * bound, C0 fitted at the smallest N
            contained = [bool(c <= c0 * (n / ns[0]) ** GROWTH_LIMIT * (1 + 1e-12)) for n, c in zip(ns, cs)]
            passed = (bool(len(ns) < 2 or slope <= GROWTH_LIMIT) and all(np.isfinite(cs))
                      and all(contained))
            summaries.append(AuditReport(
                name="superlevel_growth",
                parameters={"s": float(s), "regime": regime, "N": ns, "C": cs,
                            "fit_N": ns[0], "within_fit": contained},
                measured=max(cs), bound=c0, fitted_constant=c0,
                growth_exponent=slope, passed=passed,
                skipped="" if len(ns) >= 2 else "fewer than two N values in this regime",
            ))
    return cells + summaries


# ---------------------------------------------------------------------------
# mixed-norm audit


def lp_norm(field, p):
    """(sum |f|^p h^2)^(1/p) over all samples."""
    return float(np.sum(np.abs(field.samples) ** p) * field.spacing ** 2) ** (1.0 / p)


def _standard_norms(N, R, ps, spacing):
    """L^p norms of the unit-coefficient sum over Q_R, streamed by rows."""
    freq = FrequencySet.standard(N)
    acc = np.zeros(len(ps))
    for _, block in iter_rows(freq, Region.square(R), spacing):
        a = np.abs(block)
        acc += [np.sum(a ** p) for p in ps]
    return freq, (acc * spacing ** 2) ** (1.0 / np.asarray(ps))


def run_lqlp_audit(config):
    """||f||_{L^p} / right-hand side per family, (p, q) and R, with slopes across R.

    ``square_root`` uses the median ratio over ``config.seeds``; the
    ``standard`` family is the unit-coefficient sum with N = R^(1/2).
    """
    config.validate()
    pq = config.pq
    ps = sorted({p for p, _ in pq})
    cells = []
    for fam in config.families:
        for R in config.R:
            params = {"family": fam, "R": int(R), "beta": config.beta}
            if _grid_bytes(R, config.spacing) > config.memory_budget_gib * GIB:
                for p, q in pq:
                    cells.append(skip_record("lqlp", dict(params, p=p, q=q), "grid exceeds memory budget"))
                continue
            if fam == "standard":
                N = int(round(math.sqrt(R)))
                freq, norms = _standard_norms(N, R, ps, config.spacing)
                for p, q in pq:
                    lhs = float(norms[ps.index(p)])
                    rhs = lq_lp_rhs(N, R, p, q, freq.coeffs)
                    cells.append(AuditReport("lqlp", dict(params, p=p, q=q, N=N), lhs, rhs, lhs / rhs, passed=True))
                continue
            seeds = config.seeds if fam == "square_root" else [config.seed]
            ratios = {k: [] for k in pq}
            lhs_by = {k: [] for k in pq}
            for sd in seeds:
                f = generate_example(fam, R, config.beta, seed=sd, spacing=config.spacing)
                for p, q in pq:
                    lhs = lp_norm(f, p)
                    rhs = lq_lp_rhs_caps(R, config.beta, p, q, example_cap_lp_norms(fam, R, config.beta, p))
                    ratios[(p, q)].append(lhs / rhs)
                    lhs_by[(p, q)].append(lhs)
            for p, q in pq:
                r = float(np.median(ratios[(p, q)]))
                lhs = float(np.median(lhs_by[(p, q)]))
                cells.append(AuditReport("lqlp", dict(params, p=p, q=q, seeds=len(seeds)),
                                         lhs, lhs / r, r, passed=bool(np.isfinite(r))))
    summaries = []
    for fam in config.families:
        for p, q in pq:
            rows = [c for c in cells if not c.skipped and c.parameters["family"] == fam
                    and c.parameters["p"] == p and c.parameters["q"] == q]
            if not rows:
                continue
            Rs = [c.parameters["R"] for c in rows]
            cs = [c.fitted_constant for c in rows]
            slope = growth_exponent(Rs, cs)
            summaries.append(AuditReport(
                "lqlp_growth", {"family": fam, "p": p, "q": q, "R": Rs, "C": cs},
                measured=max(cs), bound=cs[0], fitted_constant=cs[0], growth_exponent=slope,
                passed=bool(len(Rs) < 2 or slope <= GROWTH_LIMIT),
            ))
    return cells + summaries
