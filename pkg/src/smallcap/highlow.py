"""Multi-scale high/low machinery on a periodic grid.

Cap pieces live on the square torus of side ``L`` sampled with spacing
``h``; every convolution is spectral. Wave-packet tubes form a sheared lattice compatible with the
torus, weights are the polynomially decaying kernels adapted to the dual
boxes, and the square functions, their low/high splits and the region
decomposition follow from those.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import fft as sfft

from .geometry import build_cap_partition, is_normalized, lambda_at
from .report import AuditReport, growth_exponent
from .sharp import smoothed_box

__all__ = [
    "Torus",
    "TubeProfile",
    "tube_profile",
    "TubeLattice",
    "WeightKernel",
    "tube_weight",
    "ball_weight",
    "build_weights",
    "bump",
    "CutoffBank",
    "TestField",
    "single_cap_field",
    "single_packet_field",
    "random_cap_field",
    "standard_test_fields",
    "PrunedHierarchy",
    "prune",
    "SquareFunctionSet",
    "square_functions",
    "RegionDecomposition",
    "classify_regions",
    "audit_low_lemma",
    "audit_high_lemma1",
    "audit_high_lemma2",
    "audit_pruning_lemma",
    "audit_locally_constant",
    "default_alpha",
    "run_highlow",
    "LEMMA_MULTIPLES",
    "run_suite",
    "stability_reports",
]

WEIGHT_POWER = 10
KAISER_BETA = 8.0
PROFILE_CUTOFF = 9  # tube widths beyond which the profile is dropped (< 1e-7)
DIV_GUARD = 1e-8


# ---------------------------------------------------------------------------
# grid


@dataclass(frozen=True)
class Torus:
    """Square torus of side ``L`` sampled with spacing ``h``."""

    L: float
    h: float = 0.5

    @property
    def n(self):
        return int(round(self.L / self.h))

    @property
    def cell(self):
        return self.h * self.h

    def coords(self):
        """Grid coordinates in [0, L)."""
        return self.h * np.arange(self.n)

    def min_image(self):
        x = self.coords()
        return np.where(x >= self.L / 2, x - self.L, x)

    def rfreqs(self):
        """(kx, ky) arrays broadcasting to the rfft2 output shape."""
        kx = sfft.fftfreq(self.n, d=self.h)[:, None]
        ky = sfft.rfftfreq(self.n, d=self.h)[None, :]
        return kx, ky

    def rfft(self, a):
        return sfft.rfft2(a)

    def irfft(self, a):
        return sfft.irfft2(a, s=(self.n, self.n))

    def integrate(self, a):
        return float(np.sum(a) * self.cell)


# ---------------------------------------------------------------------------
# tube profile and lattice


@dataclass(frozen=True)
class TubeProfile:
    """1D profile P with sum_m P(t - m) = 1 and Fourier support in [-1/2, 1/2].

    P = c * chi_[-1/2, 1/2] * |phi^vee|^2 where phi is a Kaiser-Bessel window
    supported in [-1/4, 1/4].
    """

    t: np.ndarray
    values: np.ndarray

    def __call__(self, u):
        return np.interp(u, self.t, self.values, left=0.0, right=0.0)


def _kaiser_dual_sq(y, beta):
    z = np.sqrt((beta * beta - (np.pi * y / 2.0) ** 2).astype(complex))
    small = np.abs(z) < 1e-12
    v = np.where(small, 1.0, np.sinh(z) / np.where(small, 1.0, z)).real
    return v * v


@lru_cache(maxsize=4)
def tube_profile(beta=KAISER_BETA, step=1.0 / 512):
    y = np.arange(-64.0, 64.0 + step, step)
    k = _kaiser_dual_sq(y, beta)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (k[1:] + k[:-1])) * step])
    t = np.arange(-PROFILE_CUTOFF - 1, PROFILE_CUTOFF + 1 + step, step)
    vals = (np.interp(t + 0.5, y, cum) - np.interp(t - 0.5, y, cum)) / cum[-1]
    vals[np.abs(t) > PROFILE_CUTOFF] = 0.0
    # renormalize so the integer translates sum to 1 on the tabulated range
    frac = np.arange(0.0, 1.0, step)
    tot = sum(np.interp(frac - m, t, vals) for m in range(-PROFILE_CUTOFF - 1, PROFILE_CUTOFF + 2))
    vals = vals / np.mean(tot)
    t.setflags(write=False)
    vals.setflags(write=False)
    return TubeProfile(t, vals)


class TubeLattice:
    """Sheared tube lattice for a cap centered at ``c`` at scale ``Rk``.

    Tubes are parallelograms spanned by v1 = (a, 0) and v2 = (s, b) with
    a ~ Rk^(1/2), b ~ Rk and s ~ -2 c b, so their long side follows the
    normal (-2c, 1) of the parabola at c. The integers n1 = L/a, n2 = L/b and
    S = s n2 / a make the lattice contain L Z^2, so tube classes are the
    pairs (m1 mod n1, m2 mod n2) under (m1, m2) ~ (m1 - S, m2 + n2).
    """

    def __init__(self, torus, Rk, c, profile=None):
        self.torus = torus
        self.Rk = float(Rk)
        self.c = float(c)
        L = torus.L
        n = torus.n
        # largest divisor of n not above L / Rk^(1/2): tube width a >= Rk^(1/2)
        # is a whole number of cells, so every row is a shifted periodic pattern
        target = max(1, int(math.floor(L / math.sqrt(Rk) + 1e-9)))
        self.n1 = max(d for d in range(1, min(target, n) + 1) if n % d == 0)
        self.n2 = max(1, int(round(L / Rk)))
        self.a = L / self.n1
        self.b = L / self.n2
        self.S = int(round(-2.0 * c * self.b * self.n2 / self.a))
        self.s = self.S * self.a / self.n2
        self.P = profile or tube_profile()
        x = torus.coords()
        self._u2 = x / self.b  # per row j
        self._sig = self.s * x / (self.b * self.a)  # u1 shift per row
        self._x1a = x / self.a

    @property
    def n_tubes(self):
        return self.n1 * self.n2

    def _u1(self):
        """u1[j, i] for row j, column i."""
        return self._x1a[None, :] - self._sig[:, None]

    def _canon(self, m1, m2raw):
        k = np.floor_divide(m2raw, self.n2)
        return np.mod(m1 + k * self.S, self.n1), m2raw - k * self.n2

    def _m2_range(self):
        return np.arange(-PROFILE_CUTOFF - 1, self.n2 + PROFILE_CUTOFF + 1)

    def _row_geometry(self):
        """Row shifts and per-row weight tables.

        With p = a / h cells per tube width, u1(i, j) = (i + o_j) / p. Writing
        o_j = f_j + rho_j, the row rolled by f_j has u1 = (q p + r + rho_j) / p,
        so the column q of the rolled row lies in tube q and its weights
        P(u1 - m1) depend only on (j, r, q - m1).
        """
        if getattr(self, "_geom", None) is None:
            n = self.torus.n
            p = n // self.n1
            o = -self._sig * p
            f = np.floor(o).astype(np.int64)
            rho = o - f
            cols = np.mod(np.arange(n)[None, :] - f[:, None], n)  # rolled -> original
            frac = (np.arange(p)[None, :] + rho[:, None]) / p
            ds = np.arange(-PROFILE_CUTOFF, PROFILE_CUTOFF + 2)
            tables = [self.P(frac - d) for d in ds]
            self._geom = (p, cols, ds, tables)
        return self._geom

    def sup_norms(self, absf):
        """max_x psi_T(x) |f(x)| for every tube, shape (n1, n2).

        Each torus image of a tube is treated separately (max over images);
        this is exact when n2 and n1 exceed twice the profile cutoff.
        """
        F = np.asarray(absf, dtype=float).T  # rows j (x2), columns i (x1)
        n = F.shape[0]
        p, cols, ds, tables = self._row_geometry()
        G = np.take_along_axis(F, cols, axis=1).reshape(n, self.n1, p)
        M1 = np.zeros((n, self.n1))
        for d, w in zip(ds, tables):
            cand = (G * w[:, None, :]).max(axis=2)
            np.maximum(M1, np.roll(cand, d, axis=1), out=M1)
        M = np.zeros((self.n1, self.n2))
        for m2 in self._m2_range():
            jw = np.nonzero(np.abs(self._u2 - m2) <= PROFILE_CUTOFF + 1)[0]
            if jw.size == 0:
                continue
            vals = (self.P(self._u2[jw] - m2)[:, None] * M1[jw]).max(axis=0)
            m1c, m2c = self._canon(np.arange(self.n1), np.full(self.n1, m2))
            np.maximum.at(M, (m1c, m2c), vals)
        return M

    def field(self, W):
        """sum over tubes of W[m1, m2] psi_T on the grid, indexed [i, j]."""
        W = np.asarray(W, dtype=float)
        m2r = self._m2_range()
        k = np.floor_divide(m2r, self.n2)
        m1 = np.arange(self.n1)
        Wext = W[np.mod(m1[:, None] + k[None, :] * self.S, self.n1), (m2r - k * self.n2)[None, :]]
        P2 = self.P(self._u2[:, None] - m2r[None, :])  # (n, len m2r)
        A = P2 @ Wext.T  # (n rows, n1)
        p, cols, ds, tables = self._row_geometry()
        n = A.shape[0]
        G = np.zeros((n, self.n1, p))
        for d, w in zip(ds, tables):
            G += np.roll(A, -d, axis=1)[:, :, None] * w[:, None, :]
        out = np.empty((n, n))
        np.put_along_axis(out, cols, G.reshape(n, n), axis=1)
        return out.T

    def cell_index(self):
        """Flat tube id (m1 * n2 + m2) of the tube whose core holds each cell."""
        u1 = self._u1()
        m1r = np.rint(u1).astype(np.int64)
        m2r = np.broadcast_to(np.rint(self._u2).astype(np.int64)[:, None], u1.shape)
        m1c, m2c = self._canon(m1r, m2r)
        return (m1c * self.n2 + m2c).T


# ---------------------------------------------------------------------------
# weights


@dataclass(frozen=True)
class WeightKernel:
    """L^1-normalized kernel on the torus with its spectrum."""

    scale: tuple
    center: float
    values: np.ndarray
    spectrum: np.ndarray

    def convolve(self, torus, a):
        return torus.irfft(torus.rfft(a) * self.spectrum)


def _kernel(torus, vals, scale, center):
    vals = vals / (vals.sum() * torus.cell)
    spec = torus.rfft(vals) * torus.cell
    return WeightKernel(scale, center, vals, spec)


def tube_weight(torus, Rk, c):
    """c0 / ((1 + |x.t|^2/Rk)^10 (1 + |x.n|^2/Rk^2)^10) in the frame of the cap at c."""
    x = torus.min_image()
    nrm = math.sqrt(1.0 + 4.0 * c * c)
    X1, X2 = x[:, None], x[None, :]
    along = (X1 + 2.0 * c * X2) / nrm
    normal = (-2.0 * c * X1 + X2) / nrm
    vals = (1.0 + along ** 2 / Rk) ** -WEIGHT_POWER * (1.0 + normal ** 2 / Rk ** 2) ** -WEIGHT_POWER
    return _kernel(torus, vals, (math.sqrt(Rk), float(Rk)), float(c))


def ball_weight(torus, s):
    x = torus.min_image()
    r2 = x[:, None] ** 2 + x[None, :] ** 2
    return _kernel(torus, (1.0 + r2 / (s * s)) ** -WEIGHT_POWER, (float(s), float(s)), 0.0)


def build_weights(torus, partition, level, caps=None):
    """Kernels for the caps of ``level`` (all caps, or the listed indices)."""
    iv = partition.intervals(level)
    Rk = partition.scale(level)
    idx = range(len(iv)) if caps is None else caps
    return {i: tube_weight(torus, Rk, 0.5 * (iv[i, 0] + iv[i, 1])) for i in idx}


# ---------------------------------------------------------------------------
# cutoffs


def bump(r):
    """Radial profile: 1 on [0, 1], exp(1 - 1/(1 - u^2)) with u = r - 1 on (1, 2), 0 after."""
    r = np.asarray(r, dtype=float)
    u = np.clip(r - 1.0, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        inner = np.where(u < 1, np.exp(1.0 - 1.0 / np.where(u < 1, 1.0 - u * u, 1.0)), 0.0)
    return np.where(r <= 1, 1.0, inner)


class CutoffBank:
    """Frequency cutoffs on the torus grid.

    ``low`` is phi(2^(J+1) xi) with 2^J <= ceil(R^beta) < 2^(J+1); ``band(s)``
    is phi(xi / s) - phi(2 xi / s), living where |xi| is within a factor 2 of
    s; ``level(k)`` is phi(R_{k+1}^(1/2) xi).
    """

    def __init__(self, torus, partition):
        self.torus = torus
        self.partition = partition
        kx, ky = torus.rfreqs()
        self.r = np.sqrt(kx * kx + ky * ky)
        self.J = int(math.floor(math.log2(partition.m)))
        self.low = bump(2.0 ** (self.J + 1) * self.r)

    def band(self, s):
        return bump(self.r / s) - bump(2.0 * self.r / s)

    def band_scales(self):
        """The dyadic s = 2^-j, j = -2..J, whose bands tile with ``low``."""
        return [2.0 ** -j for j in range(-2, self.J + 1)]

    def level(self, k):
        return bump(math.sqrt(self.partition.scale(k + 1)) * self.r)

    def partition_error(self):
        tot = self.low + sum(self.band(s) for s in self.band_scales())
        return float(np.max(np.abs(tot - 1.0)))


# ---------------------------------------------------------------------------
# test fields


@dataclass
class TestField:
    """Sum of cap pieces given by lattice coefficients on the torus.

    ``caps`` maps a gamma index to arrays (j1, j2, coeff) of frequencies
    (j1 / L, j2 / L) and their coefficients; each piece has sup norm 1.
    """

    name: str
    R: float
    beta: float
    torus: Torus
    partition: object
    caps: dict

    @property
    def active(self):
        a = np.zeros(self.partition.n_gamma, dtype=bool)
        a[list(self.caps)] = True
        return a

    def piece(self, gammas, scale=1.0):
        n = self.torus.n
        C = np.zeros((n, n), dtype=complex)
        for g in gammas:
            if g in self.caps:
                j1, j2, cf = self.caps[g]
                np.add.at(C, (np.mod(j1, n), np.mod(j2, n)), cf * scale)
        return sfft.ifft2(C) * (n * n)

    def cap_l2(self):
        """sum_gamma ||f_gamma||_2^2 over the torus (Parseval)."""
        L2 = self.torus.L ** 2
        return float(sum(np.sum(np.abs(cf) ** 2) for _, _, cf in self.caps.values()) * L2)

    def scaled(self, t):
        caps = {g: (j1, j2, cf * t) for g, (j1, j2, cf) in self.caps.items()}
        return TestField(self.name, self.R, self.beta, self.torus, self.partition, caps)


def _cap_lattice(torus, partition, g):
    """Lattice frequencies (j1, j2) / L in gamma within 1/R of the parabola."""
    L = torus.L
    lo, hi = partition.gamma_edges[g], partition.gamma_edges[g + 1]
    j1 = np.arange(int(math.ceil(lo * L - 1e-9)), int(math.ceil(hi * L - 1e-9)))
    out1, out2 = [], []
    for d in (-1, 0, 1):
        j2 = np.rint(j1 * j1 / L).astype(np.int64) + d
        ok = np.abs(j2 / L - (j1 / L) ** 2) <= 1.0 / partition.R + 1e-12
        out1.append(j1[ok])
        out2.append(j2[ok])
    return np.concatenate(out1), np.concatenate(out2)


def _normalize_sup(torus, j1, j2, cf):
    n = torus.n
    C = np.zeros((n, n), dtype=complex)
    np.add.at(C, (np.mod(j1, n), np.mod(j2, n)), cf)
    sup = np.abs(sfft.ifft2(C) * (n * n)).max()
    return cf / sup


def _setup(R, beta, eps):
    part = build_cap_partition(R, beta, eps)
    return Torus(float(R), 0.5), part


def single_cap_field(R, beta=0.75, eps=0.25, xi=0.25):
    """One character e(x . (xi, xi^2)) on the lattice, |f| = 1."""
    torus, part = _setup(R, beta, eps)
    j1 = int(round(xi * torus.L))
    g = int(part.gamma_of_point(j1 / torus.L))
    j2 = int(round(j1 * j1 / torus.L))
    caps = {g: (np.array([j1]), np.array([j2]), np.array([1.0 + 0j]))}
    return TestField("single_cap", R, beta, torus, part, caps)


def single_packet_field(R, beta=0.75, eps=0.25, xi=0.25):
    """A smooth-in-frequency bump over one cap: a wave packet at the origin."""
    torus, part = _setup(R, beta, eps)
    g = int(part.gamma_of_point(xi))
    j1, j2 = _cap_lattice(torus, part, g)
    keep = j2 == np.rint(j1 * j1 / torus.L)
    j1, j2 = j1[keep], j2[keep]
    lo, hi = part.gamma_edges[g], part.gamma_edges[g + 1]
    cf = smoothed_box((j1 / torus.L - 0.5 * (lo + hi)) / (hi - lo)).astype(complex)
    cf = _normalize_sup(torus, j1, j2, cf)
    return TestField("single_packet", R, beta, torus, part, {g: (j1, j2, cf)})


def random_cap_field(R, beta=0.75, eps=0.25, n_caps=8, seed=0):
    """``n_caps`` random gamma caps with Gaussian coefficients, each of sup norm 1."""
    torus, part = _setup(R, beta, eps)
    rng = np.random.default_rng(seed)
    gs = np.sort(rng.choice(part.n_gamma, size=n_caps, replace=False))
    caps = {}
    for g in gs:
        j1, j2 = _cap_lattice(torus, part, int(g))
        cf = rng.normal(size=j1.size) + 1j * rng.normal(size=j1.size)
        caps[int(g)] = (j1, j2, _normalize_sup(torus, j1, j2, cf))
    return TestField(f"random8_seed{seed}", R, beta, torus, part, caps)


def standard_test_fields(R, beta=0.75, eps=0.25, seeds=range(5)):
    yield single_cap_field(R, beta, eps)
    yield single_packet_field(R, beta, eps)
    for s in seeds:
        yield random_cap_field(R, beta, eps, 8, s)


# ---------------------------------------------------------------------------
# pruning


def _level_caps(partition, level):
    """Map from each cap of ``level`` to its gamma indices."""
    par = partition.parent_of_gamma(level)
    out = {}
    for g, p in enumerate(par):
        out.setdefault(int(p), []).append(g)
    return out


def _center(partition, level, i):
    iv = partition.intervals(level)
    return 0.5 * (iv[i, 0] + iv[i, 1])


@dataclass
class PrunedHierarchy:
    """Pruned pieces and their aggregates.

    ``aggregate[k]`` is f^k for k = 1..N and ``aggregate[N + 1]`` is f. The
    per-cap pieces are not kept; what later stages need from them is
    recorded while the recursion runs.
    """

    field: TestField
    alpha: float
    M: float
    delta: float
    threshold: float
    lambda1: int
    n_levels: int
    aggregate: dict = field(default_factory=dict)
    g: dict = field(default_factory=dict)  # k -> g_k, k = 1..N-1
    l4: dict = field(default_factory=dict)  # k -> sum_tau int |f^k_tau|^4
    bad_tubes: dict = field(default_factory=dict)
    linf_ratio: dict = field(default_factory=dict)
    monotone_excess: float = 0.0
    fourier_leak: float = 0.0
    pou_error: float = 0.0
    lattices: dict = field(default_factory=dict)  # (level, cap) -> TubeLattice


def _fourier_leak(torus, f, c, w, Rk, ref=None):
    """Spectral energy of f outside 2 tau (tau centered at c), relative to ``ref``.

    ``ref`` defaults to f itself; pass the unpruned piece so that a piece
    pruned almost to zero is not judged by its rounding residue.
    """
    F = np.abs(sfft.fft2(f)) ** 2
    k1 = sfft.fftfreq(torus.n, d=torus.h)[:, None]
    k2 = sfft.fftfreq(torus.n, d=torus.h)[None, :]
    period = 1.0 / torus.h  # grid frequencies are only defined modulo this

    def wrap(v):
        return np.mod(v + period / 2, period) - period / 2

    d1 = wrap(k1 - c)
    d2 = wrap(k2 - (2 * c * (c + d1) - c * c))
    inside = (np.abs(d1) <= w) & (np.abs(d2) <= 2.0 / Rk + 2.0 / torus.L)
    tot = F.sum() if ref is None else float(np.sum(np.abs(ref) ** 2)) * f.size
    return float(F[~inside].sum() / tot) if tot > 0 else 0.0


def prune(tf, alpha, M=4.0, delta=0.1, check_leak=True):
    """Downward pruning recursion from theta (level N) to tau_1.

    A tube T of a cap at level k is bad when ``||psi_T f^{k+1}||_inf`` exceeds
    R^(M delta) lambda(1) / alpha; bad tubes are removed by multiplying by
    1 - sum_bad psi_T.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    for g, (j1, j2, cf) in tf.caps.items():
        if np.abs(tf.piece([g])).max() > 1 + 1e-9:
            raise ValueError(f"cap {g} violates ||f_gamma||_inf <= 1")
    torus, part = tf.torus, tf.partition
    R = part.R
    N = part.n_levels
    lam1 = lambda_at(part, tf.active, 1.0)
    thr = R ** (M * delta) * lam1 / alpha
    hier = PrunedHierarchy(tf, alpha, M, delta, thr, lam1, N)
    hier.aggregate[N + 1] = tf.piece(list(tf.caps))
    active = set(tf.caps)

    # level N works on theta pieces
    cur = {}
    for i, gs in _level_caps(part, "theta").items():
        if active.intersection(gs):
            cur[i] = tf.piece(gs)
    cur_level = "theta"
    pou = 0.0
    for k in range(N, 0, -1):
        lvl = cur_level
        Rk = part.scale(lvl) if lvl != "theta" else R
        if k < N:
            # g_k from f^{k+1}_{tau_k}
            wk = build_weights(torus, part, lvl, caps=list(cur))
            hier.g[k] = sum(wk[i].convolve(torus, np.abs(f) ** 2) for i, f in cur.items())
        nxt = {}
        nbad = 0
        ratios = []
        iv = part.intervals(lvl)
        for i, f in cur.items():
            c = _center(part, lvl, i)
            absf = np.abs(f)
            lat = TubeLattice(torus, Rk, c)
            hier.lattices[(k, i)] = lat
            if absf.max() <= thr:
                fk = f
            else:
                sup = lat.sup_norms(absf)
                bad = sup > thr
                nbad += int(bad.sum())
                if bad.any():
                    fk = f * (1.0 - lat.field(bad.astype(float)))
                    hier.monotone_excess = max(hier.monotone_excess,
                                               float(np.max(np.abs(fk) - absf)))
                    if check_leak:
                        hier.fourier_leak = max(hier.fourier_leak, _fourier_leak(
                            torus, fk, c, iv[i, 1] - iv[i, 0], Rk, ref=f))
                else:
                    fk = f
            ratios.append(float(np.abs(fk).max() / thr))
            nxt[i] = fk
        if cur:
            lat = next(iter(hier.lattices[(k, i)] for i in cur))
            pou = max(pou, float(np.max(np.abs(lat.field(np.ones((lat.n1, lat.n2))) - 1.0))))
        hier.bad_tubes[k] = nbad
        hier.linf_ratio[k] = max(ratios) if ratios else 0.0
        hier.l4[k] = sum(torus.integrate(np.abs(f) ** 4) for f in nxt.values())
        hier.aggregate[k] = sum(nxt.values()) if nxt else np.zeros((torus.n, torus.n), complex)
        if k == 1:
            break
        # regroup into the parents at level k - 1
        parent_level = k - 1
        par = part.parent_of_gamma(parent_level)
        own = part.parent_of_gamma(lvl)
        grouped = {}
        for i, f in nxt.items():
            gidx = int(np.nonzero(own == i)[0][0])
            p = int(par[gidx])
            grouped[p] = grouped[p] + f if p in grouped else f
        cur = grouped
        cur_level = parent_level
    hier.pou_error = pou
    return hier


# ---------------------------------------------------------------------------
# square functions and regions


@dataclass
class SquareFunctionSet:
    G: np.ndarray
    G_low: np.ndarray
    G_high: np.ndarray
    g: dict
    g_low: dict
    g_high: dict
    cutoffs: CutoffBank
    n_levels: int


def square_functions(hier):
    """G = sum_theta |f_theta|^2 * w_theta and g_k with their low/high parts.

    g_N and its low part are identified with G and G^low.
    """
    tf = hier.field
    torus, part = tf.torus, tf.partition
    bank = CutoffBank(torus, part)
    groups = _level_caps(part, "theta")
    active = set(tf.caps)
    G = np.zeros((torus.n, torus.n))
    for i, gs in groups.items():
        if active.intersection(gs):
            w = tube_weight(torus, part.R, _center(part, "theta", i))
            G = G + w.convolve(torus, np.abs(tf.piece(gs)) ** 2)
    G_low = torus.irfft(torus.rfft(G) * bank.low)
    G_high = G - G_low
    N = hier.n_levels
    g, gl, gh = {}, {}, {}
    for k, gk in hier.g.items():
        g[k] = gk
        gl[k] = torus.irfft(torus.rfft(gk) * bank.level(k))
        gh[k] = gk - gl[k]
    g[N], gl[N], gh[N] = G, G_low, G_high
    return SquareFunctionSet(G, G_low, G_high, g, gl, gh, bank, N)


@dataclass
class RegionDecomposition:
    H: np.ndarray
    omega: dict
    L: np.ndarray

    def disjoint(self):
        masks = [self.H, self.L, *self.omega.values()]
        tot = sum(m.astype(np.int64) for m in masks)
        return bool(np.all(tot <= 1))


def classify_regions(sq):
    """High set, the Omega_k and the low set, assigned cellwise in that order.

    A cell outside H goes to the largest k with g_k high-dominated and every
    g_j, j > k, low-dominated; failing that, to L when every g_j and G are
    low-dominated.
    """
    H = sq.G <= 2.0 * np.abs(sq.G_high)
    N = sq.n_levels
    low_ok = {j: sq.g[j] <= 2.0 * np.abs(sq.g_low[j]) for j in sq.g}
    taken = H.copy()
    omega = {}
    above = np.ones_like(H)
    for k in range(N - 1, 0, -1):
        above = above & low_ok[k + 1]
        if k in sq.g:
            m = ~taken & above & (sq.g[k] <= 2.0 * np.abs(sq.g_high[k]))
        else:
            m = np.zeros_like(H)
        omega[k] = m
        taken |= m
    all_low = above & (low_ok[1] if 1 in low_ok else True) & (sq.G <= 2.0 * np.abs(sq.G_low))
    Lm = ~taken & all_low
    return RegionDecomposition(H, omega, Lm)


# ---------------------------------------------------------------------------
# audits


def _guarded_ratio(num, den):
    mask = den >= DIV_GUARD * max(float(np.mean(den)), 1e-300)
    excluded = int(mask.size - mask.sum())
    if not mask.any():
        return 0.0, excluded
    return float(np.max(num[mask] / den[mask])), excluded


def audit_low_lemma(sq, lambda1, R=None):
    """sup |G^low| / lambda(1) and max |g_k^low| / g_{k+1}."""
    t0 = time.perf_counter()
    c0 = float(np.max(np.abs(sq.G_low)) / lambda1)
    per_k, excl = {}, 0
    for k in sorted(sq.g):
        if k + 1 in sq.g and k < sq.n_levels:
            r, e = _guarded_ratio(np.abs(sq.g_low[k]), sq.g[k + 1])
            per_k[k] = r
            excl += e
    c = max([c0, *per_k.values()])
    return AuditReport("low_lemma", {"R": R, "G_low_over_lambda1": c0, "per_level": per_k,
                                     "excluded_cells": excl},
                       measured=c, bound=float("nan"), fitted_constant=c, passed=np.isfinite(c),
                       runtime=time.perf_counter() - t0)


def audit_high_lemma1(sq, tf):
    """int |G * eta_s|^2 / (lambda(1/(sR)) lambda(s) sum ||f_gamma||_2^2) per dyadic s."""
    t0 = time.perf_counter()
    torus, part = tf.torus, tf.partition
    R, beta = part.R, part.beta
    Ghat = torus.rfft(sq.G)
    mass = tf.cap_l2()
    per_s = {}
    j_lo = int(math.ceil(0.5 * math.log2(R) - 1e-9))
    j_hi = int(math.floor(beta * math.log2(R) + 1e-9))
    for j in range(j_lo, j_hi + 1):
        s = 2.0 ** -j
        band = torus.irfft(Ghat * sq.cutoffs.band(s))
        lhs = torus.integrate(band ** 2)
        rhs = lambda_at(part, tf.active, 1.0 / (s * R)) * lambda_at(part, tf.active, s) * mass
        per_s[s] = lhs / rhs if rhs > 0 else 0.0
    c = max(per_s.values()) if per_s else 0.0
    ok, worst = is_normalized(part, tf.active)
    return AuditReport("high_lemma_1", {"R": R, "per_scale": per_s, "normalized": ok,
                                        "normalization_ratio": worst},
                       measured=c, fitted_constant=c, passed=np.isfinite(c),
                       runtime=time.perf_counter() - t0)


def audit_high_lemma2(hier, sq):
    """int |g_k^high|^2 / sum_{tau_{k+1}} int |f^{k+1}_{tau_{k+1}}|^4 per level."""
    t0 = time.perf_counter()
    torus = hier.field.torus
    per_k, skipped = {}, []
    for k in sorted(hier.g):
        lhs = torus.integrate(sq.g_high[k] ** 2)
        rhs = hier.l4.get(k + 1, 0.0)
        if rhs <= 0:
            skipped.append(k)
            continue
        per_k[k] = lhs / rhs
    c = max(per_k.values()) if per_k else 0.0
    return AuditReport("high_lemma_2", {"R": hier.field.R, "per_level": per_k, "skipped": skipped},
                       measured=c, fitted_constant=c, passed=np.isfinite(c),
                       runtime=time.perf_counter() - t0)


def audit_pruning_lemma(hier, regions):
    """max over Omega_k of |f - f^{k+1}| and over L of |f - f^1|, in units R^(-M delta) alpha."""
    t0 = time.perf_counter()
    R = hier.field.partition.R
    unit = R ** (-hier.M * hier.delta) * hier.alpha
    f = hier.aggregate[hier.n_levels + 1]
    per = {}
    for k, m in regions.omega.items():
        if m.any():
            per[f"omega_{k}"] = float(np.abs(f - hier.aggregate[k + 1])[m].max() / unit)
    if regions.L.any():
        per["low_set"] = float(np.abs(f - hier.aggregate[1])[regions.L].max() / unit)
    c = max(per.values()) if per else 0.0
    return AuditReport("pruning_lemma", {"R": R, "per_region": per, "alpha": hier.alpha,
                                         "threshold": hier.threshold,
                                         "bad_tubes": hier.bad_tubes},
                       measured=c, fitted_constant=c, passed=np.isfinite(c),
                       runtime=time.perf_counter() - t0)


def audit_locally_constant(tf, levels=None):
    """Worst ||f_tau||_{L^inf(T)}^2 / min_T (|f_tau|^2 * w_tau) over caps and tubes."""
    t0 = time.perf_counter()
    torus, part = tf.torus, tf.partition
    levels = levels or ["theta", 1]
    active = set(tf.caps)
    worst, excl = 0.0, 0
    for lvl in levels:
        Rk = part.R if lvl == "theta" else part.scale(lvl)
        for i, gs in _level_caps(part, lvl).items():
            if not active.intersection(gs):
                continue
            c = _center(part, lvl, i)
            f2 = np.abs(tf.piece(gs)) ** 2
            conv = tube_weight(torus, Rk, c).convolve(torus, f2)
            ids = TubeLattice(torus, Rk, c).cell_index().ravel()
            nt = int(ids.max()) + 1
            mx = np.zeros(nt)
            mn = np.full(nt, np.inf)
            np.maximum.at(mx, ids, f2.ravel())
            np.minimum.at(mn, ids, conv.ravel())
            ok = np.isfinite(mn) & (mn >= DIV_GUARD * conv.mean())
            excl += int((np.isfinite(mn) & ~ok).sum())
            if ok.any():
                worst = max(worst, float(np.max(mx[ok] / mn[ok])))
    return AuditReport("locally_constant", {"R": part.R, "levels": [str(x) for x in levels],
                                            "excluded_tubes": excl},
                       measured=worst, fitted_constant=worst, passed=np.isfinite(worst),
                       runtime=time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# driver

# stability multiple allowed between the two audit scales
LEMMA_MULTIPLES = {"low_lemma": 2.0, "high_lemma_1": 4.0, "high_lemma_2": 4.0,
                   "pruning_lemma": 4.0, "locally_constant": 4.0}


def default_alpha(tf, M=4.0, delta=0.1, fraction=0.5):
    """alpha putting the pruning threshold at ``fraction`` of the heaviest theta packet."""
    torus, part = tf.torus, tf.partition
    best = 0.0
    for i, gs in _level_caps(part, "theta").items():
        if set(gs) & set(tf.caps):
            lat = TubeLattice(torus, part.R, _center(part, "theta", i))
            best = max(best, float(lat.sup_norms(np.abs(tf.piece(gs))).max()))
    lam1 = lambda_at(part, tf.active, 1.0)
    return part.R ** (M * delta) * lam1 / (fraction * best)


@dataclass
class HighLowResult:
    field_name: str
    R: float
    alpha: float
    reports: list
    invariants: dict


def run_highlow(tf, alpha=None, M=4.0, delta=0.1):
    """Prune, build square functions and regions, and run all five audits."""
    if alpha is None:
        alpha = default_alpha(tf, M, delta)
    hier = prune(tf, alpha, M, delta)
    sq = square_functions(hier)
    regions = classify_regions(sq)
    reports = [
        audit_low_lemma(sq, hier.lambda1, tf.R),
        audit_high_lemma1(sq, tf),
        audit_high_lemma2(hier, sq),
        audit_pruning_lemma(hier, regions),
        audit_locally_constant(tf),
    ]
    for r in reports:
        r.parameters["field"] = tf.name
    inv = {
        "partition_of_unity_error": hier.pou_error,
        "monotone_excess": hier.monotone_excess,
        "fourier_leak": hier.fourier_leak,
        "cutoff_partition_error": sq.cutoffs.partition_error(),
        "decomposition_error": float(np.max(np.abs(sq.G_low + sq.G_high - sq.G))),
        "regions_disjoint": regions.disjoint(),
        "H_condition": bool(np.all(sq.G[regions.H] <= 2 * np.abs(sq.G_high[regions.H]))),
        "bad_tubes": dict(hier.bad_tubes),
    }
    return HighLowResult(tf.name, tf.R, alpha, reports, inv)


def run_suite(Rs=(256, 1024), beta=0.75, eps=0.25, seeds=range(5), threads=1):
    """run_highlow on the standard fields at every R; returns {R: [HighLowResult]}."""
    out = {}
    for R in Rs:
        fields_ = standard_test_fields(R, beta, eps, seeds)
        if threads == 1:
            out[R] = [run_highlow(tf) for tf in fields_]
        else:
            with ThreadPoolExecutor(max_workers=threads) as ex:
                out[R] = list(ex.map(run_highlow, fields_))
    return out


def stability_reports(results, pou_tol=1e-6):
    """Suite-level checks from ``run_suite`` output.

    Per audit, C(R) is the largest fitted constant over the suite; the audit
    passes when C(R) <= multiple * C(R_min) at every larger R. Invariants
    are reported as one extra record.
    """
    Rs = sorted(results)
    reps = []
    for name, mult in LEMMA_MULTIPLES.items():
        cs = [max(r.fitted_constant for res in results[R] for r in res.reports if r.name == name)
              for R in Rs]
        c0 = cs[0]
        ok = all(np.isfinite(cs)) and all(c <= mult * c0 * (1 + 1e-12) for c in cs[1:])
        reps.append(AuditReport(
            f"{name}_stability", {"R": Rs, "C": cs, "multiple": mult,
                                  "fields": len(results[Rs[0]])},
            measured=max(cs[1:]) if len(cs) > 1 else c0, bound=mult * c0, fitted_constant=c0,
            growth_exponent=growth_exponent(Rs, cs), passed=bool(ok),
        ))
    pou = max(res.invariants["partition_of_unity_error"] for R in Rs for res in results[R])
    mono = max(res.invariants["monotone_excess"] for R in Rs for res in results[R])
    leak = max(res.invariants["fourier_leak"] for R in Rs for res in results[R])
    disjoint = all(res.invariants["regions_disjoint"] for R in Rs for res in results[R])
    reps.append(AuditReport(
        "highlow_invariants", {"R": Rs, "partition_of_unity_error": pou, "monotone_excess": mono,
                               "fourier_leak": leak, "regions_disjoint": disjoint},
        measured=pou, bound=pou_tol, fitted_constant=float("nan"),
        passed=bool(pou <= pou_tol and mono <= 1e-12 and disjoint),
    ))
    return reps
