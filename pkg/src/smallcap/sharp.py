"""Extremal configurations: major arcs of the quadratic Weyl sum, the
shifted strip that collects many of them, and three model families of
functions with Fourier support in the R^-1 neighborhood of the parabola.
"""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.integrate import trapezoid
from scipy.special import erf

from .engine import (MAX_SPACING, Region, SampledField, evaluate,
                     evaluate_points, streaming_level_areas)
from .geometry import FrequencySet, build_cap_partition
from .report import AuditReport

__all__ = [
    "ARC_RADIUS",
    "MajorArc",
    "enumerate_major_arcs",
    "enumerate_major_arcs_bruteforce",
    "check_disjoint",
    "arc_amplitude",
    "arc_amplitude_audit",
    "arcs_to_csv",
    "totients",
    "totient_gcd",
    "totient_sum",
    "totient_sum_gcd",
    "reduced_fractions",
    "max_window_count",
    "find_shift_v",
    "case2_audit",
    "SMOOTH_SIGMA",
    "smoothed_box",
    "smoothed_box_dual",
    "taper",
    "generate_example",
    "block_constancy_ratio",
    "example_cap_lp_norms",
]

ARC_RADIUS = Fraction(1, 10 ** 10)


# ---------------------------------------------------------------------------
# major arcs


@dataclass(frozen=True)
class MajorArc:
    """Box of half-width ``radius`` about (aN/q, bN^2/q)."""

    q: int
    a: int
    b: int
    N: int
    radius: Fraction = ARC_RADIUS

    @property
    def center_exact(self):
        return Fraction(self.a * self.N, self.q), Fraction(self.b * self.N ** 2, self.q)

    @property
    def center(self):
        cx, ct = self.center_exact
        return float(cx), float(ct)


def _q_max(N):
    """Largest q with q^3 <= N^2, by exact integer comparison."""
    q = int(round(N ** (2.0 / 3.0))) + 1
    while q ** 3 > N * N:
        q -= 1
    return q


def enumerate_major_arcs(N, radius=ARC_RADIUS):
    """All (q, a, b): q odd, 1 <= b <= q <= N^(2/3), gcd(b, q) = 1, 0 <= a <= q."""
    if N < 2:
        raise ValueError("N must be >= 2")
    arcs = []
    for q in range(1, _q_max(N) + 1, 2):
        bs = [b for b in range(1, q + 1) if math.gcd(b, q) == 1]
        arcs.extend(MajorArc(q, a, b, N, radius) for b in bs for a in range(q + 1))
    return arcs


def enumerate_major_arcs_bruteforce(N):
    """Unfiltered triple loop; used as an oracle."""
    out = []
    for q in range(1, N * N + 1):
        if q ** 3 > N * N:
            break
        for b in range(1, q + 1):
            for a in range(0, q + 1):
                if q % 2 == 1 and math.gcd(b, q) == 1:
                    out.append((q, a, b))
    return out


def check_disjoint(arcs, radius=None):
    """True iff the closed boxes are pairwise disjoint (exact arithmetic).

    Boxes are sorted by second coordinate; only neighbors closer than the
    box diameter in that coordinate need an x1 comparison.
    """
    if len(arcs) < 2:
        return True
    r = Fraction(radius) if radius is not None else None
    items = []
    for arc in arcs:
        cx, ct = arc.center_exact
        items.append((ct, cx, r if r is not None else Fraction(arc.radius)))
    items.sort(key=lambda z: z[0])
    for i, (ti, xi, ri) in enumerate(items):
        for tj, xj, rj in items[i + 1:]:
            if tj - ti > ri + rj:
                break
            if abs(xj - xi) <= ri + rj:
                return False
    return True


def arc_amplitude(arc):
    """|F| at the arc center for unit coefficients on {k/N}."""
    return float(abs(evaluate_points(FrequencySet.standard(arc.N), [arc.center])[0]))


def arc_amplitude_audit(N, cap=256, sample=None, seed=0):
    """Check N/(4 sqrt q) <= |F(center)| <= 4N/sqrt q for the major arcs.

    ``sample`` limits the audit to a random subset of that many arcs.
    """
    if N > cap:
        raise ValueError(f"N={N} exceeds the audit cap {cap}")
    t0 = time.perf_counter()
    arcs = enumerate_major_arcs(N)
    if sample is not None and sample < len(arcs):
        idx = np.sort(np.random.default_rng(seed).choice(len(arcs), sample, replace=False))
        arcs = [arcs[i] for i in idx]
    freq = FrequencySet.standard(N)
    vals = np.abs(evaluate_points(freq, [a.center for a in arcs]))
    qs = np.array([a.q for a in arcs], dtype=float)
    ratio = vals * np.sqrt(qs) / N
    worst = float(max(ratio.max(), 1.0 / ratio.min()))
    bad = [(a.q, a.a, a.b) for a, r in zip(arcs, ratio) if not 0.25 <= r <= 4.0]
    return AuditReport(
        name="arc_amplitude",
        parameters={"N": N, "n_arcs": len(arcs), "violations": bad[:20]},
        measured=worst, bound=4.0, fitted_constant=worst,
        passed=not bad, runtime=time.perf_counter() - t0,
    ), arcs, vals, ratio


def arcs_to_csv(arcs, amplitudes=None, ratios=None):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["q", "a", "b", "center_x", "center_t", "amplitude", "ratio"])
    for i, arc in enumerate(arcs):
        cx, ct = arc.center
        amp = "" if amplitudes is None else repr(float(amplitudes[i]))
        rat = "" if ratios is None else repr(float(ratios[i]))
        w.writerow([arc.q, arc.a, arc.b, repr(cx), repr(ct), amp, rat])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# totients


def totients(n):
    """phi(0..n) by sieve."""
    phi = np.arange(n + 1, dtype=np.int64)
    for p in range(2, n + 1):
        if phi[p] == p:  # untouched so far, hence prime
            phi[p::p] -= phi[p::p] // p
    return phi


def totient_gcd(q):
    """phi(q) by counting k in [1, q] with gcd(k, q) = 1."""
    return int(np.count_nonzero(np.gcd(np.arange(1, q + 1), q) == 1))


def totient_sum(Q, upper=None):
    """sum of phi(q) over Q <= q < 2Q (or Q <= q < upper)."""
    if Q < 1:
        raise ValueError("Q must be >= 1")
    hi = 2 * Q if upper is None else upper
    return int(totients(hi - 1)[Q:hi].sum())


def totient_sum_gcd(Q, upper=None):
    hi = 2 * Q if upper is None else upper
    return sum(totient_gcd(q) for q in range(Q, hi))


# ---------------------------------------------------------------------------
# shift v


def reduced_fractions(q_max, q_odd=True):
    """Sorted distinct b/q in (0, 1] with gcd(b, q) = 1 and q <= q_max."""
    fr = {Fraction(b, q) for q in range(1, q_max + 1) if q % 2 or not q_odd
          for b in range(1, q + 1) if math.gcd(b, q) == 1}
    return sorted(fr)


def max_window_count(points, width):
    """Max number of sorted ``points`` in a closed window [c, c + width] in [0, 1].

    Returns ``(count, c)``; some optimal window starts at a point, clamped so
    it stays inside [0, 1].
    """
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        return 0, 0.0
    if width >= 1:
        return int(pts.size), 0.0
    starts = np.minimum(pts, 1.0 - width)
    ends = np.searchsorted(pts, starts + width + 1e-15, side="right")
    begins = np.searchsorted(pts, starts - 1e-15, side="left")
    counts = ends - begins
    k = int(np.argmax(counts))
    return int(counts[k]), float(starts[k])


def find_shift_v(N, R, alpha, strict=True):
    """Shift v in [0, N^2] whose strip [v, v + R] meets the most arcs.

    Fractions b/q with q odd, q <= N^(2/3) and q <= N^2/(16 alpha^2) are
    scanned with windows of length R/N^2 in [0, 1]; v is the window's left
    end times N^2 so the measured strip covers the whole window.
    Returns ``(v, count)``.
    """
    a2 = alpha * alpha
    if strict and not (N < a2 <= R * (1 + 1e-12)):
        raise ValueError("alpha^2 must lie in (N, R]")
    q_cap = min(_q_max(N), int(math.floor(N * N / (16.0 * a2))))
    if q_cap < 1:
        return 0.0, 0
    pts = [float(f) for f in reduced_fractions(q_cap)]
    count, left = max_window_count(pts, R / N ** 2)
    return left * N ** 2, count


def case2_audit(N, R, alpha, spacing=MAX_SPACING, n_jobs=1):
    """Measure |{x in [0,R]^2 : |F(x1, x2 + v)| >= alpha}| against R^2 N^3/alpha^6."""
    t0 = time.perf_counter()
    a2 = alpha * alpha
    v, count = find_shift_v(N, R, alpha, strict=N < a2 <= R)
    prof = streaming_level_areas(FrequencySet.standard(N), Region(0.0, v, R, R),
                                 [alpha], spacing, n_jobs=n_jobs)
    measured = float(prof.areas[0])
    bound = R * R * N ** 3 / alpha ** 6
    c = measured / bound
    return AuditReport(
        name="case2_lower",
        parameters={"N": N, "R": R, "alpha": alpha, "v": v, "arcs_in_window": count,
                    "boundary_budget": float(prof.boundary_budget[0])},
        measured=measured, bound=bound, fitted_constant=c,
        passed=c > 0, runtime=time.perf_counter() - t0,
    )


# ---------------------------------------------------------------------------
# model families

# Gaussian width of the smoothed cap indicator, in units of the cap side;
# the 10%-90% transition of the edge is then about 0.1.
SMOOTH_SIGMA = 0.039
_TAIL = 6.0


def smoothed_box(u, sigma=SMOOTH_SIGMA):
    """chi_[-1/2, 1/2] convolved with a unit-mass Gaussian of width sigma."""
    s = sigma * math.sqrt(2.0)
    u = np.asarray(u, dtype=float)
    return 0.5 * (erf((u + 0.5) / s) - erf((u - 0.5) / s))


def smoothed_box_dual(y, sigma=SMOOTH_SIGMA):
    """Inverse Fourier transform of :func:`smoothed_box`."""
    y = np.asarray(y, dtype=float)
    return np.sinc(y) * np.exp(-2.0 * np.pi ** 2 * sigma ** 2 * y * y)


def _smooth_step(t):
    t = np.clip(t, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        b = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return a / (a + b)


def taper(u):
    """C^infinity bump: 1 on |u| <= 0.4, 0 on |u| >= 0.5."""
    return _smooth_step((0.5 - np.abs(np.asarray(u, dtype=float))) / 0.1)


def _dual_power_integral(p, sigma=SMOOTH_SIGMA):
    """int |smoothed_box_dual|^p over the line."""
    y = np.linspace(0.0, 60.0 / sigma, 2_000_001)
    return 2.0 * trapezoid(np.abs(smoothed_box_dual(y, sigma)) ** p, y)


def _taper_power_integral(p):
    u = np.linspace(-0.5, 0.5, 200_001)
    return float(trapezoid(taper(u) ** p, u))


def _caps(R, beta, kind):
    part = build_cap_partition(R, beta)
    e = part.gamma_edges
    centers = 0.5 * (e[:-1] + e[1:])
    if kind == "block":
        # the theta cap containing the origin
        th = part.bounds["theta"]
        j = int(np.searchsorted(th, part.m, side="right")) - 1
        centers = centers[th[j]:th[j + 1]]
    return part, centers


def _row_spectral_field(centers, width, R, amp, region, spacing, period_factor=8,
                        chunk=128):
    """Samples of amp * sum_c (smoothed indicator of the cap at c)^vee.

    For fixed x2 each cap contributes a known 1D spectrum in x1; sampling it
    at spacing 1/Lx and inverting gives the Lx-periodization of the row,
    which equals the row on the region when Lx is a few R.
    """
    H = 1.0 / R
    Lx = period_factor * R
    n = int(round(Lx / spacing))
    nx = int(round(region.sx / spacing))
    nt = int(round(region.st / spacing))
    half = width * (0.5 + _TAIL * SMOOTH_SIGMA)
    out = np.empty((nx, nt), dtype=complex)
    for j0 in range(0, nt, chunk):
        t = region.t0 + spacing * np.arange(j0, min(j0 + chunk, nt))
        C = np.zeros((t.size, n), dtype=complex)
        row_amp = amp * H * smoothed_box_dual(H * t)
        for c in centers:
            k = np.arange(int(math.ceil((c - half) * Lx)), int(math.floor((c + half) * Lx)) + 1)
            xi = k / Lx
            prof = smoothed_box((xi - c) / width) * np.exp(2j * np.pi * region.x0 * xi) / Lx
            ph = np.exp(2j * np.pi * (np.outer(t, 2 * c * (xi - c)) + (t * c * c)[:, None]))
            np.add.at(C.T, np.mod(k, n), (ph * (prof * 1.0)).T * row_amp)
        rows = np.fft.ifft(C, axis=1)[:, :nx] * n
        out[:, j0:j0 + t.size] = rows.T
    return out


def generate_example(kind, R, beta=0.75, seed=0, spacing=MAX_SPACING):
    """Sample one of the model families on B_R = [-R/2, R/2]^2.

    ``square_root``: taper(x/R) * sum_gamma +-e(x . (c, c^2)), random signs.
    ``constructive``: R^(1+beta) * sum_gamma (smoothed indicator of gamma)^vee.
    ``block``: as constructive, restricted to the caps in one theta.
    """
    if kind not in ("square_root", "constructive", "block"):
        raise ValueError(f"unknown kind {kind!r}")
    region = Region(-R / 2.0, -R / 2.0, float(R), float(R))
    part, centers = _caps(R, beta, kind)
    if kind == "square_root":
        signs = np.random.default_rng(seed).choice([-1.0, 1.0], size=centers.size)
        freq = FrequencySet(centers, signs, n_nominal=part.m)
        field = evaluate(freq, region, spacing)
        w = taper(field.x / R)[:, None] * taper(field.t / R)[None, :]
        return SampledField(field.origin, field.side, spacing, field.samples * w)
    amp = R ** (1.0 + beta)
    samples = _row_spectral_field(centers, 1.0 / part.m, R, amp, region, spacing)
    return SampledField((region.x0, region.t0), (region.sx, region.st), spacing, samples)


def block_constancy_ratio(field, R, beta=0.75):
    """max|f| / min|f| over the dual block of the theta used by ``block``.

    The block is |x1 + 2 c x2| <= R^(1/2) / 2, |x2| <= R / 2 with c the
    theta center, i.e. the R^(1/2) x R box normal to the parabola at c.
    """
    part, centers = _caps(R, beta, "block")
    c = 0.5 * (centers[0] + centers[-1])
    x, t = field.x[:, None], field.t[None, :]
    mask = (np.abs(x + 2 * c * t) <= 0.5 * R ** 0.5) & (np.abs(t) <= 0.5 * R)
    a = np.abs(field.samples[mask])
    return float(a.max() / a.min())


def example_cap_lp_norms(kind, R, beta, p):
    """Whole-plane L^p norms of the individual cap pieces f_gamma."""
    part, centers = _caps(R, beta, kind)
    if kind == "square_root":
        val = (float(R) ** 2 * _taper_power_integral(p) ** 2) ** (1.0 / p)
    else:
        w, H = 1.0 / part.m, 1.0 / R
        # |w dual(w y)|^p integrates to w^(p-1) int|dual|^p, likewise for H
        val = R ** (1.0 + beta) * ((w * H) ** (p - 1) * _dual_power_integral(p) ** 2) ** (1.0 / p)
    return np.full(centers.size, val)
