"""Frequency-side geometry: point sets, nested cap partitions, and the
distribution function counting active small caps in windows.

Every level of a :class:`CapPartition` is stored as a list of boundaries in
units of the finest (gamma) cap index, so nesting between levels is exact
integer arithmetic rather than floating-point interval comparison.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "FrequencySet",
    "CapPartition",
    "DistributionProfile",
    "NormalizationResult",
    "build_cap_partition",
    "lambda_at",
    "lambda_profile",
    "occupancy",
    "is_normalized",
    "pigeonhole_normalize",
    "dyadic_class",
]


@dataclass(frozen=True)
class FrequencySet:
    """Points xi in [-1, 1] with complex coefficients.

    Parameters
    ----------
    points : array_like
        Strictly increasing real frequencies in [-1, 1].
    coeffs : array_like, optional
        Complex coefficients, one per point. Defaults to all ones.
    n_nominal : int, optional
        The separation scale N. Defaults to ``len(points)``.
    min_sep_factor : float
        Points must be at least ``min_sep_factor / n_nominal`` apart.
    unit_coefficients : bool
        When set, ``|a_xi| <= 1`` is enforced.
    """

    points: np.ndarray
    coeffs: np.ndarray
    n_nominal: int
    separation: float

    def __init__(self, points, coeffs=None, n_nominal=None, min_sep_factor=0.5,
                 unit_coefficients=False):
        pts = np.asarray(points, dtype=float).ravel()
        if pts.size == 0:
            raise ValueError("frequency set must be nonempty")
        if np.any(pts < -1 - 1e-12) or np.any(pts > 1 + 1e-12):
            raise ValueError("frequencies must lie in [-1, 1]")
        gaps = np.diff(pts)
        if np.any(gaps <= 0):
            raise ValueError("points must be strictly increasing")
        if coeffs is None:
            cf = np.ones(pts.size, dtype=complex)
        else:
            cf = np.asarray(coeffs, dtype=complex).ravel()
            if cf.shape != pts.shape:
                raise ValueError("need one coefficient per point")
        if not np.all(np.isfinite(cf)):
            raise ValueError("coefficients must be finite")
        n = int(n_nominal) if n_nominal is not None else pts.size
        sep = float(gaps.min()) if gaps.size else 2.0
        if not 0 < min_sep_factor <= 1:
            raise ValueError("min_sep_factor must be in (0, 1]")
        if sep < min_sep_factor / n - 1e-12:
            raise ValueError(f"separation {sep:g} below {min_sep_factor}/N")
        if unit_coefficients and np.any(np.abs(cf) > 1 + 1e-12):
            raise ValueError("unit-coefficient flag set but some |a| > 1")
        pts.setflags(write=False)
        cf.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "coeffs", cf)
        object.__setattr__(self, "n_nominal", n)
        object.__setattr__(self, "separation", sep)

    @classmethod
    def standard(cls, n, coeffs=None):
        """The set {k/N : k = 1..N} used by the extremal exponential sum."""
        return cls(np.arange(1, n + 1) / n, coeffs, n_nominal=n)

    @property
    def l2_mass(self):
        return float(np.sum(np.abs(self.coeffs) ** 2))

    def __len__(self):
        return self.points.size


@dataclass(frozen=True)
class CapPartition:
    """Nested partitions of [-1, 1] (xi_1 projections of parabola caps).

    ``bounds[name]`` holds, for level ``name``, the gamma-index boundaries
    ``b`` such that cap ``j`` is the union of gamma caps ``b[j]:b[j+1]``.
    Level names are ``"gamma"``, ``"theta"`` and ``1..n_levels`` (tau_k).
    """

    R: float
    beta: float
    eps: float
    m: int  # ceil(R**beta); gamma width is 1/m
    n_levels: int
    bounds: dict = field(repr=False)

    @property
    def gamma_edges(self):
        return -1.0 + np.arange(2 * self.m + 1) / self.m

    @property
    def n_gamma(self):
        return 2 * self.m

    def level_names(self):
        return ["gamma", "theta"] + list(range(1, self.n_levels + 1))

    def scale(self, level):
        """R_k for tau_k; R for theta/gamma."""
        if level in ("gamma", "theta"):
            return float(self.R)
        return float(self.R) ** (level * self.eps)

    def target_width(self, level):
        if level == "gamma":
            return 1.0 / self.m
        if level == "theta":
            return float(self.R) ** -0.5
        return self.scale(level) ** -0.5

    def intervals(self, level):
        """(n_caps, 2) array of [lo, hi) xi_1 intervals."""
        b = self.bounds[level]
        e = self.gamma_edges
        return np.column_stack([e[b[:-1]], e[b[1:]]])

    def n_caps(self, level):
        return len(self.bounds[level]) - 1

    def parent_of_gamma(self, level):
        """Index of the level cap containing each gamma cap."""
        b = self.bounds[level]
        return np.searchsorted(b, np.arange(self.n_gamma), side="right") - 1

    def children(self, coarse, fine):
        """For each coarse cap, the list of fine caps it contains."""
        bc, bf = self.bounds[coarse], self.bounds[fine]
        owner = np.searchsorted(bc, bf[:-1], side="right") - 1
        return [np.flatnonzero(owner == j) for j in range(len(bc) - 1)]

    def gamma_of_point(self, xi):
        idx = np.floor((np.asarray(xi, dtype=float) + 1.0) * self.m).astype(int)
        return np.clip(idx, 0, self.n_gamma - 1)

    def active_gammas(self, freq):
        """Boolean mask of gamma caps holding a nonzero coefficient."""
        mask = np.zeros(self.n_gamma, dtype=bool)
        nz = np.abs(freq.coeffs) > 0
        mask[self.gamma_of_point(freq.points[nz])] = True
        return mask

    def to_json(self):
        levels = {str(name): self.intervals(name).tolist() for name in self.level_names()}
        levels = {("tau_" + k if k.isdigit() else k): v for k, v in levels.items()}
        doc = {"R": self.R, "beta": self.beta, "eps": self.eps, "m": self.m,
               "n_levels": self.n_levels, "levels": levels}
        return json.dumps(doc, sort_keys=True)


def _group(bounds, target, gamma_width):
    """Merge consecutive caps of a finer level into caps of width <= target."""
    widths = np.diff(bounds) * gamma_width
    unit = widths.max()
    size = max(1, int(math.floor(target / unit + 1e-9)))
    return np.unique(np.append(bounds[::size], bounds[-1]))


def build_cap_partition(R, beta, eps=0.25):
    """Build gamma, theta and tau_k partitions of [-1, 1].

    Gamma caps use the interior index range ``-m+1 .. m-2`` plus two end
    pieces, ``m = ceil(R**beta)``; this is the range for which the pieces
    cover [-1, 1] exactly. Coarser levels are unions of consecutive finer
    caps with width at most (and within 2x of) the target width.
    """
    if not R >= 2:
        raise ValueError("R must be >= 2")
    if not 0.5 <= beta <= 1:
        raise ValueError("beta must lie in [1/2, 1]")
    if not 0 < eps <= 0.5:
        raise ValueError("eps must lie in (0, 1/2]")
    m = int(math.ceil(R ** beta - 1e-9))
    n_levels = max(1, int(round(1.0 / eps)))
    bounds = {"gamma": np.arange(2 * m + 1)}
    gw = 1.0 / m
    bounds["theta"] = _group(bounds["gamma"], R ** -0.5, gw)
    finer = bounds["theta"]
    for k in range(n_levels, 0, -1):
        finer = _group(finer, (R ** (k * eps)) ** -0.5, gw)
        bounds[k] = finer
    for b in bounds.values():
        b.setflags(write=False)
    return CapPartition(float(R), float(beta), float(eps), m, n_levels, bounds)


# ---------------------------------------------------------------------------
# distribution function


def lambda_at(partition, active, s):
    """Max number of active gamma caps meeting a window of xi_1-length s.

    The optimum can always be slid left until its right endpoint sits on the
    left edge of an active cap, so only those anchors are scanned.
    """
    active = np.asarray(active, dtype=bool)
    if not active.any():
        return 0
    e = partition.gamma_edges
    lo = e[:-1][active]
    hi = e[1:][active]
    # window [a - s, a] for anchors a = lo_j; cap [lo, hi) meets it iff lo <= a and hi > a - s
    anchors = lo
    right = np.searchsorted(lo, anchors, side="right")
    # hi == a - s exactly means the half-open cap just misses the window
    left = np.searchsorted(hi, anchors - s + 1e-12, side="right")
    return int(np.max(right - left))


@dataclass(frozen=True)
class DistributionProfile:
    values: dict

    def __getitem__(self, s):
        return self.values[s]

    def to_json(self):
        return json.dumps({repr(float(s)): int(v) for s, v in self.values.items()},
                          sort_keys=True)


def dyadic_scales(R, beta):
    jmin = math.ceil(math.log2(R ** -beta) - 1e-12)
    return [2.0 ** j for j in range(jmin, 2)]


def lambda_profile(partition, active, scales=None):
    """lambda(s) at dyadic s in [R**-beta, 2] (or the given scales)."""
    if scales is None:
        scales = dyadic_scales(partition.R, partition.beta)
    return DistributionProfile({float(s): lambda_at(partition, active, s) for s in scales})


# ---------------------------------------------------------------------------
# normalization


def occupancy(partition, active, level):
    """Number of active gamma caps inside each cap of ``level``."""
    parent = partition.parent_of_gamma(level)
    return np.bincount(parent[np.asarray(active, bool)], minlength=partition.n_caps(level))


def is_normalized(partition, active, factor=100.0):
    """Check the (R, eps)-normalization of the distribution function.

    For every pair of levels k > m (tau_k finer) and every tau_m, the number
    of nonzero tau_k inside tau_m must be at most
    ``factor * lambda(R_m**-1/2) / lambda(R_k**-1/2)``.

    Returns
    -------
    ok : bool
    worst_ratio : float
        Largest count / allowance over all pairs (0 when nothing is active).
    """
    active = np.asarray(active, dtype=bool)
    worst = 0.0
    levels = range(1, partition.n_levels + 1)
    lam = {k: lambda_at(partition, active, partition.scale(k) ** -0.5) for k in levels}
    for k in levels:
        if lam[k] == 0:
            continue
        nonzero_k = occupancy(partition, active, k) > 0
        for mlev in range(1, k):
            kids = partition.children(mlev, k)
            counts = np.array([nonzero_k[c].sum() for c in kids])
            allowance = factor * lam[mlev] / lam[k]
            worst = max(worst, float(counts.max(initial=0)) / allowance)
    return worst <= 1.0, worst


def dyadic_class(counts):
    """floor(log2(count)) for positive counts, -1 for empty."""
    counts = np.asarray(counts)
    out = np.full(counts.shape, -1, dtype=int)
    pos = counts > 0
    out[pos] = np.floor(np.log2(counts[pos])).astype(int)
    return out


@dataclass(frozen=True)
class NormalizationResult:
    selected: np.ndarray  # gamma mask
    classes: dict  # level -> chosen dyadic class lambda_k (power of two)
    retained_ratio: float  # retained gamma count / total
    retained_mass_ratio: float


def pigeonhole_normalize(partition, active, mass=None):
    """Keep one dyadic occupancy class per level, finest level first.

    At each level the caps still holding selected gammas are grouped by
    ``#gamma in [lam, 2 lam)``; the class retaining the most gammas wins
    (ties go to the larger class).
    """
    active = np.asarray(active, dtype=bool)
    if not active.any():
        raise ValueError("need at least one active cap")
    mass = np.ones(partition.n_gamma) if mass is None else np.asarray(mass, float)
    sel = active.copy()
    classes = {}
    for k in range(partition.n_levels, 0, -1):
        occ = occupancy(partition, sel, k)
        cls = dyadic_class(occ)
        best, best_key = None, None
        for c in np.unique(cls[cls >= 0]):
            key = (int(occ[cls == c].sum()), int(c))
            if best_key is None or key > best_key:
                best, best_key = int(c), key
        keep_caps = cls == best
        sel &= keep_caps[partition.parent_of_gamma(k)]
        classes[k] = 2 ** best
    total = active.sum()
    tm = mass[active].sum()
    return NormalizationResult(
        sel, classes, float(sel.sum() / total),
        float(mass[sel].sum() / tm) if tm > 0 else 0.0,
    )
