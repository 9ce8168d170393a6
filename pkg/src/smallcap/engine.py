"""Exponential sums on grids: evaluation, moments, superlevel-set measures
and the closed-form right-hand sides they are compared against.

Samples are indexed ``samples[i, j]`` with ``i`` along x1 (the ``x``
variable) and ``j`` along x2 (the ``t`` variable).
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from .geometry import FrequencySet

__all__ = [
    "SampledField",
    "LevelSetProfile",
    "Region",
    "evaluate",
    "evaluate_points",
    "iter_rows",
    "lattice_denominator",
    "moment",
    "superlevel_measure",
    "level_profile",
    "streaming_level_areas",
    "theorem_bound",
    "theorem_regime",
    "lq_lp_rhs",
    "lq_lp_rhs_caps",
    "save_field",
    "load_field",
    "profile_to_csv",
    "profile_from_csv",
]

TWO_PI = 2.0 * np.pi
MAX_SPACING = 0.25
BOUNDARY_KAPPA = 0.05


@dataclass(frozen=True)
class Region:
    """Axis-aligned rectangle [x0, x0 + sx) x [t0, t0 + st)."""

    x0: float
    t0: float
    sx: float
    st: float

    @classmethod
    def square(cls, side, origin=(0.0, 0.0)):
        return cls(float(origin[0]), float(origin[1]), float(side), float(side))

    @property
    def area(self):
        return self.sx * self.st


@dataclass(frozen=True)
class SampledField:
    origin: tuple
    side: tuple  # (sx, st)
    spacing: float
    samples: np.ndarray
    band_limit: float = 1.0

    def __post_init__(self):
        if self.spacing > MAX_SPACING * self.band_limit ** -1 + 1e-15:
            raise ValueError("spacing too coarse for the band limit")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("samples must be finite")

    @property
    def shape(self):
        return self.samples.shape

    @property
    def x(self):
        return self.origin[0] + self.spacing * np.arange(self.samples.shape[0])

    @property
    def t(self):
        return self.origin[1] + self.spacing * np.arange(self.samples.shape[1])

    @property
    def area(self):
        return self.side[0] * self.side[1]

    def region_mask(self, region):
        """Index slices of the samples lying in ``region``."""
        if region is None:
            return slice(None), slice(None)
        h = self.spacing
        i0 = int(math.ceil((region.x0 - self.origin[0]) / h - 1e-9))
        j0 = int(math.ceil((region.t0 - self.origin[1]) / h - 1e-9))
        i1 = int(math.ceil((region.x0 + region.sx - self.origin[0]) / h - 1e-9))
        j1 = int(math.ceil((region.t0 + region.st - self.origin[1]) / h - 1e-9))
        n1, n2 = self.samples.shape
        if i0 < 0 or j0 < 0 or i1 > n1 or j1 > n2:
            raise ValueError("region exceeds the sampled extent")
        return slice(i0, i1), slice(j0, j1)


@dataclass(frozen=True)
class LevelSetProfile:
    alphas: np.ndarray
    areas: np.ndarray
    boundary_budget: np.ndarray


def _check_grid(region, spacing):
    if spacing > MAX_SPACING:
        raise ValueError(f"spacing {spacing} > {MAX_SPACING} aliases the field")
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    if min(region.sx, region.st) < 1:
        raise ValueError("region side must be at least 1")
    n1 = int(round(region.sx / spacing))
    n2 = int(round(region.st / spacing))
    return n1, n2


def lattice_denominator(freq, max_den=1 << 16):
    """Smallest L with every frequency in (1/L)Z, or None."""
    den = 1
    for p in freq.points:
        f = Fraction(float(p)).limit_denominator(max_den)
        if abs(float(f) - p) > 1e-13:
            return None
        den = den * f.denominator // math.gcd(den, f.denominator)
        if den > max_den:
            return None
    return den


def _direct_rows(freq, x, t):
    """Direct summation, returns array (len(t), len(x))."""
    xi = freq.points
    e1 = np.exp(TWO_PI * 1j * np.outer(x, xi))  # (nx, K)
    e2 = np.exp(TWO_PI * 1j * np.outer(t, xi * xi)) * freq.coeffs  # (nt, K)
    return e2 @ e1.T


def _fast_rows(freq, x0, nx, t, spacing, L):
    """Per-row length-m DFT along x1 for frequencies p/L, m = L/spacing."""
    m = int(round(L / spacing))
    p = np.rint(freq.points * L).astype(np.int64)
    # phases reduced modulo 1 in exact arithmetic where the grid allows it
    ph_x = np.mod(x0 * p, L) / L
    ph_t = np.mod(np.outer(t, p * p), L * L) / (L * L)
    c = freq.coeffs * np.exp(TWO_PI * 1j * (ph_x + ph_t))  # (nt, K)
    C = np.zeros((t.size, m), dtype=complex)
    np.add.at(C.T, np.mod(p, m), c.T)
    G = np.fft.ifft(C, axis=1) * m
    return G[:, np.arange(nx) % m]


def _fast_ok(freq, spacing, L):
    if L is None:
        return False
    m = L / spacing
    return abs(m - round(m)) < 1e-9


def iter_rows(freq, region, spacing=MAX_SPACING, method="auto", chunk=512,
              n_jobs=1):
    """Yield ``(j0, block)`` with block[j - j0, i] = F(x_i, t_j).

    Chunks are produced in order regardless of ``n_jobs``.
    """
    n1, n2 = _check_grid(region, spacing)
    x = region.x0 + spacing * np.arange(n1)
    L = lattice_denominator(freq) if method in ("auto", "fast") else None
    use_fast = _fast_ok(freq, spacing, L)
    if method == "fast" and not use_fast:
        raise ValueError("fast path needs frequencies in (1/L)Z with L/spacing integer")

    def work(j0):
        t = region.t0 + spacing * np.arange(j0, min(j0 + chunk, n2))
        if use_fast:
            return j0, _fast_rows(freq, region.x0, n1, t, spacing, L)
        return j0, _direct_rows(freq, x, t)

    starts = range(0, n2, chunk)
    if n_jobs == 1:
        for j0 in starts:
            yield work(j0)
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as ex:
            yield from ex.map(work, starts)


def evaluate(freq, region, spacing=MAX_SPACING, method="auto", n_jobs=1):
    """Sample sum_xi a_xi e(x xi + t xi^2) on the grid covering ``region``.

    ``method`` is ``"auto"`` (fast transform when the frequencies sit on a
    lattice (1/L)Z with L/spacing integral), ``"fast"`` or ``"direct"``.
    """
    if not isinstance(freq, FrequencySet):
        raise TypeError("freq must be a FrequencySet")
    if isinstance(region, (int, float)):
        region = Region.square(region)
    n1, n2 = _check_grid(region, spacing)
    out = np.empty((n1, n2), dtype=complex)
    for j0, block in iter_rows(freq, region, spacing, method, n_jobs=n_jobs):
        out[:, j0:j0 + block.shape[0]] = block.T
    return SampledField((region.x0, region.t0), (region.sx, region.st), spacing, out)


def evaluate_points(freq, points):
    """Direct sum at arbitrary (x, t) points; ``points`` has shape (n, 2)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    xi = freq.points
    phase = np.outer(pts[:, 0], xi) + np.outer(pts[:, 1], xi * xi)
    return np.exp(TWO_PI * 1j * phase) @ freq.coeffs


def moment(field, p, region=None):
    """|Q|^-1 sum |f|^p h^2 over the samples in ``region``."""
    if p < 2:
        raise ValueError("p must be >= 2")
    si, sj = field.region_mask(region)
    a = np.abs(field.samples[si, sj])
    area = region.area if region is not None else field.area
    # np.sum reduces pairwise, so results do not depend on chunking
    return float(np.sum(a ** p) * field.spacing ** 2 / area)


def superlevel_measure(field, alpha, region=None, kappa=BOUNDARY_KAPPA):
    """Area of {|f| >= alpha} and its boundary-cell budget.

    Returns ``(area, budget)`` where budget counts cells with
    ``|f| in [alpha (1 - kappa), alpha (1 + kappa)]``.
    """
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    si, sj = field.region_mask(region)
    a = np.abs(field.samples[si, sj])
    h2 = field.spacing ** 2
    area = np.count_nonzero(a >= alpha) * h2
    budget = np.count_nonzero((a >= alpha * (1 - kappa)) & (a <= alpha * (1 + kappa))) * h2
    return float(area), float(budget)


def level_profile(field, alphas, region=None, kappa=BOUNDARY_KAPPA):
    alphas = np.sort(np.asarray(alphas, dtype=float))
    res = [superlevel_measure(field, a, region, kappa) for a in alphas]
    return LevelSetProfile(alphas, np.array([r[0] for r in res]), np.array([r[1] for r in res]))


def streaming_level_areas(freq, region, alphas, spacing=MAX_SPACING,
                          kappa=BOUNDARY_KAPPA, n_jobs=1):
    """Level-set profile without materializing the whole field."""
    alphas = np.sort(np.asarray(alphas, dtype=float))
    counts = np.zeros(alphas.size, dtype=np.int64)
    budget = np.zeros(alphas.size, dtype=np.int64)
    for _, block in iter_rows(freq, region, spacing, n_jobs=n_jobs):
        a = np.sort(np.abs(block).ravel())
        counts += a.size - np.searchsorted(a, alphas, side="left")
        lo = np.searchsorted(a, alphas * (1 - kappa), side="left")
        hi = np.searchsorted(a, alphas * (1 + kappa), side="right")
        budget += hi - lo
    h2 = spacing ** 2
    return LevelSetProfile(alphas, counts * h2, budget * h2)


# ---------------------------------------------------------------------------
# closed-form right-hand sides


def theorem_regime(N, R, alpha):
    """1 when alpha^2 > R, 2 when N <= alpha^2 <= R, 3 when alpha^2 < N."""
    a2 = alpha * alpha
    if a2 > R:
        return 1
    return 2 if a2 >= N else 3


def theorem_bound(N, R, alpha, l2mass):
    """Three-regime superlevel bound without the C_eps R^eps factor.

    Returns ``(bound, regime)`` with regime 1 (alpha^2 > R), 2
    (N <= alpha^2 <= R) or 3 (alpha^2 < N).
    """
    if not N <= R * (1 + 1e-12) or not R <= N * N * (1 + 1e-12):
        raise ValueError("R must lie in [N, N^2]")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    a2 = alpha * alpha
    regime = theorem_regime(N, R, alpha)
    if regime == 1:
        return N * N * R * l2mass / a2 ** 2, 1
    if regime == 2:
        return N * N * R * R * l2mass / a2 ** 3, 2
    return float(R * R), 3


def _check_pq(p, q):
    inv_q = 0.0 if math.isinf(q) else 1.0 / q
    if 3.0 / p + inv_q > 1 + 1e-12:
        raise ValueError("need 3/p + 1/q <= 1")
    return inv_q


def lq_lp_rhs(N, R, p, q, coeffs):
    """(N^{1-1/p-1/q} R^{1/p} + N^{1/2-1/q} R^{2/p}) * ||a||_q."""
    inv_q = _check_pq(p, q)
    if not N <= R * (1 + 1e-12) or not R <= N * N * (1 + 1e-12):
        raise ValueError("R must lie in [N, N^2]")
    a = np.abs(np.asarray(coeffs, dtype=complex))
    norm = a.max() if inv_q == 0 else float(np.sum(a ** q) ** inv_q)
    return (N ** (1 - 1 / p - inv_q) * R ** (1 / p) + N ** (0.5 - inv_q) * R ** (2 / p)) * norm


def lq_lp_rhs_caps(R, beta, p, q, cap_lp_norms):
    """Cap form: (R^{b(1-1/q)-(1+b)/p} + R^{b(1/2-1/q)}) (sum ||f_g||_p^q)^{1/q}."""
    inv_q = _check_pq(p, q)
    n = np.asarray(cap_lp_norms, dtype=float)
    norm = n.max() if inv_q == 0 else float(np.sum(n ** q) ** inv_q)
    b = beta
    return (R ** (b * (1 - inv_q) - (1 + b) / p) + R ** (b * (0.5 - inv_q))) * norm


# ---------------------------------------------------------------------------
# file formats


def save_field(field, path):
    """Little-endian complex64 samples plus a JSON sidecar ``<path>.json``."""
    path = Path(path)
    field.samples.astype("<c8").tofile(path)
    meta = {"origin": list(field.origin), "side": list(field.side),
            "spacing": field.spacing, "band_limit": field.band_limit,
            "shape": list(field.samples.shape)}
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(meta, sort_keys=True))


def load_field(path):
    path = Path(path)
    meta = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    data = np.fromfile(path, dtype="<c8").reshape(meta["shape"]).astype(complex)
    return SampledField(tuple(meta["origin"]), tuple(meta["side"]), meta["spacing"],
                        data, meta["band_limit"])


def profile_to_csv(profile):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["alpha", "area", "boundary_budget"])
    for a, ar, b in zip(profile.alphas, profile.areas, profile.boundary_budget):
        w.writerow([repr(float(a)), repr(float(ar)), repr(float(b))])
    return buf.getvalue()


def profile_from_csv(text):
    rows = list(csv.DictReader(io.StringIO(text)))
    col = lambda k: np.array([float(r[k]) for r in rows])  # noqa: E731
    return LevelSetProfile(col("alpha"), col("area"), col("boundary_budget"))
