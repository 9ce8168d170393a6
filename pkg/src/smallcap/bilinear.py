"""Bilinear counting, broad sets and the broad/narrow decomposition.

Blocks theta_S are the xi1-intervals of length S^(-1/2) tiling [-1, 1],
thickened vertically by S^(-1) around the parabola. The two separated caps
are tau = [-1, -D/2] and tau' = [D/2, 1].
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .highlow import Torus, ball_weight
from .report import AuditReport, growth_exponent

__all__ = [
    "DISTANCE_C_SEED",
    "DISTANCE_C_MAX",
    "QuadrupleCount",
    "block_boxes",
    "count_resonant_quadruples",
    "quadruple_oracle",
    "broad_set",
    "BroadPiece",
    "BroadNarrow",
    "broad_narrow_decompose",
    "BilinearField",
    "bilinear_field",
    "dilate",
    "audit_bilinear",
    "counting_reports",
    "bilinear_reports",
]

DISTANCE_C_SEED = 8
DISTANCE_C_MAX = 16


def _root(S):
    """Exact S^(1/2) as an integer; S must be a perfect square >= 4."""
    if S != int(S) or S < 4:
        raise ValueError("S must be an integer >= 4")
    u = math.isqrt(int(S))
    if u * u != int(S):
        raise ValueError("S must be a perfect square so block edges are exact")
    return u


def _check_sd(S, D):
    u = _root(S)
    D = Fraction(D).limit_denominator(10 ** 9) if isinstance(D, float) else Fraction(D)
    if not (Fraction(1, u) <= D <= Fraction(1, 2)):
        raise ValueError("need S^(-1/2) <= D <= 1/2")
    return u, D


# ---------------------------------------------------------------------------
# resonant quadruples


def block_boxes(S):
    """Integer boxes of the blocks in units of 1/S.

    Block i covers xi1 in [i/u, (i+1)/u] with u = S^(1/2), i = -u..u-1, and
    xi2 within 1/S of xi1^2. Returns (index, x_lo, x_hi, y_lo, y_hi).
    """
    u = _root(S)
    i = np.arange(-u, u, dtype=np.int64)
    lo2, hi2 = i * i, (i + 1) * (i + 1)
    return i, i * u, (i + 1) * u, np.minimum(lo2, hi2) - 1, np.maximum(lo2, hi2) + 1


@dataclass
class QuadrupleCount:
    """Per (theta_1, theta_1') counts of resonant (theta_2, theta_2')."""

    S: int
    D: Fraction
    tau: np.ndarray  # block indices meeting tau
    tau_prime: np.ndarray
    counts: np.ndarray  # (len tau, len tau_prime)
    max_distance: int  # largest block offset in a passing tuple, in units S^(-1/2)
    fitted_C: float  # max_distance * D
    fitted_C_prime: float  # max count * D

    @property
    def total(self):
        return int(self.counts.sum())

    @property
    def distance_law_ok(self):
        return self.fitted_C <= DISTANCE_C_MAX

    def violations(self, C=DISTANCE_C_MAX):
        """Passing tuples whose offset exceeds C D^(-1) S^(-1/2) (0 when the law holds)."""
        return int(self.max_distance * self.D > C)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["pair_index", "theta1", "theta1_prime", "count"])
        for k, (a, b) in enumerate(np.ndindex(self.counts.shape)):
            w.writerow([k, int(self.tau[a]), int(self.tau_prime[b]), int(self.counts[a, b])])
        return buf.getvalue()


def _meeting(S, D):
    u, D = _check_sd(S, D)
    i = np.arange(-u, u)
    # interiors meet: [i/u, (i+1)/u] against [-1, -D/2] and [D/2, 1]
    half = D / 2
    tau = np.array([k for k in i if Fraction(int(k), u) < -half])
    taup = np.array([k for k in i if Fraction(int(k) + 1, u) > half])
    return u, D, tau, taup


def count_resonant_quadruples(S, D):
    """Exhaustive count of tuples whose difference boxes nearly overlap.

    The difference box of (theta_1, theta_2) bounds {xi - xi'} over the two
    blocks. A tuple passes when the box of (theta_1, theta_2) meets the
    S^(-1/2) neighborhood of the box of (theta_1', theta_2'). Boxes are
    supersets, so passing is conservative. All arithmetic is in integers.
    """
    u, D, tau, taup = _meeting(S, D)
    idx, xl, xh, yl, yh = block_boxes(S)
    off = u  # block index i sits at position i + u
    t, tp = tau + off, taup + off
    # difference boxes for all (theta_1, theta_2) inside tau, and inside tau'
    ax_lo = xl[t][:, None] - xh[t][None, :]
    ax_hi = xh[t][:, None] - xl[t][None, :]
    ay_lo = yl[t][:, None] - yh[t][None, :]
    ay_hi = yh[t][:, None] - yl[t][None, :]
    bx_lo = xl[tp][:, None] - xh[tp][None, :] - u
    bx_hi = xh[tp][:, None] - xl[tp][None, :] + u
    by_lo = yl[tp][:, None] - yh[tp][None, :] - u
    by_hi = yh[tp][:, None] - yl[tp][None, :] + u
    # pass[a, b, a', b'] over theta_1 = a, theta_2 = b, theta_1' = a', theta_2' = b'
    ok = ((ax_lo[:, :, None, None] <= bx_hi[None, None]) & (bx_lo[None, None] <= ax_hi[:, :, None, None])
          & (ay_lo[:, :, None, None] <= by_hi[None, None]) & (by_lo[None, None] <= ay_hi[:, :, None, None]))
    counts = ok.sum(axis=(1, 3))
    a, b, a2, b2 = np.nonzero(ok)
    dist = np.maximum(np.abs(tau[a] - tau[b]), np.abs(taup[a2] - taup[b2]))
    maxd = int(dist.max()) if dist.size else 0
    return QuadrupleCount(int(S), D, tau, taup, counts, maxd,
                          float(maxd * D), float(counts.max() * D) if counts.size else 0.0)


def quadruple_oracle(S, D):
    """Plain nested-loop version of the pass test in exact fractions."""
    u, D, tau, taup = _meeting(S, D)
    r = Fraction(1, u)
    th = Fraction(1, u * u)

    def box(i):
        lo, hi = Fraction(int(i), u), Fraction(int(i) + 1, u)
        return lo, hi, min(lo * lo, hi * hi) - th, max(lo * lo, hi * hi) + th

    def diff(p, q):
        return p[0] - q[1], p[1] - q[0], p[2] - q[3], p[3] - q[2]

    B = {int(i): box(i) for i in np.concatenate([tau, taup])}
    counts = np.zeros((len(tau), len(taup)), dtype=np.int64)
    for ia, a in enumerate(tau):
        for b in tau:
            A = diff(B[int(a)], B[int(b)])
            for ib, a2 in enumerate(taup):
                for b2 in taup:
                    Q = diff(B[int(a2)], B[int(b2)])
                    if (A[0] <= Q[1] + r and Q[0] - r <= A[1]
                            and A[2] <= Q[3] + r and Q[2] - r <= A[3]):
                        counts[ia, ib] += 1
    return counts


# ---------------------------------------------------------------------------
# broad sets and the broad/narrow decomposition


def broad_set(f_tau, f_tau_prime, alpha, K, caps, exponent=4.0):
    """Cells with alpha/2 < |f_tau f_tau'|^(1/2) <= 2 alpha and |f_tau| + |f_tau'| <= K^exponent alpha.

    ``caps`` is the index pair of tau and tau' in the partition into
    intervals of length 1/K; adjacent or equal caps are rejected.
    """
    i, j = caps
    if abs(int(i) - int(j)) < 2:
        raise ValueError("tau and tau' must be non-adjacent")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    a, b = np.abs(f_tau), np.abs(f_tau_prime)
    g = np.sqrt(a * b)
    return (g > alpha / 2) & (g <= 2 * alpha) & (a + b <= K ** exponent * alpha)


@dataclass(frozen=True)
class BroadPiece:
    delta: float  # length of the parent block
    tau: int  # child indices at the finer level
    tau_prime: int
    cells: int  # cells where this pair realizes the broad maximum


@dataclass
class BroadNarrow:
    K: int
    m: int
    C: float
    exponent: float
    f: np.ndarray  # |f|
    narrow: np.ndarray  # max over the finest blocks
    broad: list  # per level, the dominated maximal pair product^(1/2)
    pieces: list = field(default_factory=list)

    def bound(self):
        return self.C ** self.m * (self.narrow + self.K ** self.exponent * sum(self.broad))

    def branch(self):
        """0 where the narrow term alone bounds |f|, else 1 + the level of the largest broad term."""
        nar = self.C ** self.m * self.narrow
        stack = np.stack(self.broad) * self.C ** self.m * self.K ** self.exponent * len(self.broad)
        out = np.where(self.f <= nar * (1 + 1e-12), 0, 1 + np.argmax(stack, axis=0))
        return out

    def verify(self):
        """max |f| / bound over cells (<= 1 when the decomposition holds)."""
        b = self.bound()
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(b > 0, self.f / b, np.where(self.f > 0, np.inf, 0.0))
        return float(r.max())


def broad_narrow_decompose(pieces, K, C=4.0, exponent=4.0):
    """Iterated broad/narrow split of f = sum of the finest pieces.

    ``pieces`` has shape (2 K^m, ...): the finest blocks of length K^(-m)
    tiling [-1, 1]. Level l blocks have length K^(-l); the parent at level 0
    is the whole interval with 2K children. At each parent the broad term is
    the largest |f_tau f_tau'|^(1/2) over non-adjacent children, kept only
    where C max_child |f_tau0| <= K^exponent times it.
    """
    K = int(K)
    if K < 2:
        raise ValueError("K must be >= 2")
    pieces = np.asarray(pieces)
    nb = pieces.shape[0]
    m = round(math.log(nb / 2) / math.log(K))
    if 2 * K ** m != nb:
        raise ValueError("number of pieces must be 2 K^m")
    if m < 1:
        raise ValueError("need at least one level")
    shape = pieces.shape[1:]
    levels = [pieces.reshape((2 * K ** l, K ** (m - l)) + shape).sum(axis=1) for l in range(m + 1)]
    f = np.abs(pieces.sum(axis=0))
    broad, out_pieces = [], []
    for l in range(m):
        kids = np.abs(levels[l + 1])
        n_par = 1 if l == 0 else 2 * K ** l
        per = kids.shape[0] // n_par
        best = np.zeros(shape)
        best_pair = np.full(shape + (2,), -1, dtype=np.int64)
        for p in range(n_par):
            ch = kids[p * per:(p + 1) * per]
            top = ch.max(axis=0)
            pmax = np.zeros(shape)
            parg = np.full(shape + (2,), -1, dtype=np.int64)
            for a in range(per):
                for b in range(a + 2, per):
                    v = np.sqrt(ch[a] * ch[b])
                    upd = v > pmax
                    pmax = np.where(upd, v, pmax)
                    parg[upd] = (p * per + a, p * per + b)
            keep = (C * top <= K ** exponent * pmax) & (pmax > 0)
            val = np.where(keep, pmax, 0.0)
            upd = val > best
            best = np.where(upd, val, best)
            best_pair[upd] = parg[upd]
        broad.append(best)
        delta = 2.0 if l == 0 else float(K) ** -l
        flat = best_pair.reshape(-1, 2)
        hit = flat[:, 0] >= 0
        if hit.any():
            uniq, cnt = np.unique(flat[hit], axis=0, return_counts=True)
            out_pieces += [BroadPiece(delta, int(a), int(b), int(c)) for (a, b), c in zip(uniq, cnt)]
    return BroadNarrow(K, m, float(C), float(exponent), f, np.abs(pieces).max(axis=0), broad, out_pieces)


# ---------------------------------------------------------------------------
# bilinear restriction audit


@dataclass
class BilinearField:
    """Block pieces f_theta on a torus, stored as sparse spectra.

    Block i covers xi1 in [i/u, (i+1)/u]; ``spectra[k]`` holds the integer
    frequency indices (j1, j2) and coefficients of block ``blocks[k]``.
    """

    S: int
    torus: Torus
    blocks: np.ndarray
    spectra: list

    def _synth(self, ks):
        n = self.torus.n
        spec = np.zeros((n, n), dtype=complex)
        for k in ks:
            j1, j2, c = self.spectra[k]
            np.add.at(spec, (np.mod(j1, n), np.mod(j2, n)), c)
        return np.fft.ifft2(spec) * n * n

    def piece(self, block):
        return self._synth(np.flatnonzero(self.blocks == block))

    def part(self, which):
        return self._synth(np.flatnonzero(np.isin(self.blocks, which)))

    def square_sum(self, which):
        """sum over the listed blocks of |f_theta|^2."""
        out = np.zeros((self.torus.n, self.torus.n))
        for k in np.flatnonzero(np.isin(self.blocks, which)):
            out += np.abs(self._synth([k])) ** 2
        return out


def bilinear_field(S, blocks=None, L=None, seed=0, h=0.5):
    """Unit random-phase coefficients on the lattice points of each block.

    Frequencies are (j1, j2) / L with j1 / L in the block (half-open) and
    |j2 / L - (j1 / L)^2| <= 1/S. The default torus side is L = 2S.
    """
    u = _root(S)
    L = float(L if L is not None else 2 * S)
    torus = Torus(L, h)
    if blocks is None:
        blocks = np.arange(-u, u)
    blocks = np.asarray(blocks)
    rng = np.random.default_rng(seed)
    spectra = []
    for b in blocks:
        j1s, j2s = [], []
        for a in range(math.ceil(b * L / u), math.ceil((b + 1) * L / u)):
            c = a / L
            lo = math.ceil((c * c - 1.0 / S) * L - 1e-9)
            hi = math.floor((c * c + 1.0 / S) * L + 1e-9)
            j1s.append(np.full(hi - lo + 1, a))
            j2s.append(np.arange(lo, hi + 1))
        j1, j2 = np.concatenate(j1s), np.concatenate(j2s)
        spectra.append((j1, j2, np.exp(2j * np.pi * rng.random(j1.size)) / j1.size))
    return BilinearField(int(S), torus, blocks, spectra)


def dilate(torus, mask, radius):
    """N_radius(mask) on the torus via a disk convolution."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        return mask.copy()
    x = torus.min_image()
    disk = (x[:, None] ** 2 + x[None, :] ** 2 <= radius * radius).astype(float)
    conv = torus.irfft(torus.rfft(mask.astype(float)) * torus.rfft(disk))
    return conv > 0.5


def audit_bilinear(bf, D, X=None):
    """int_X |f_tau|^2 |f_tau'|^2 against D^-2 int_{N(X)} (sum |f_theta|^2 * w)^2.

    tau = [-1, -D/2] and tau' = [D/2, 1]; N(X) is the S^(1/2) neighborhood
    and w the L^1-normalized weight at scale S^(1/2).
    """
    S, torus = bf.S, bf.torus
    u, Dq = _check_sd(S, D)
    _, _, tau, taup = _meeting(S, Dq)
    n = torus.n
    X = np.ones((n, n), dtype=bool) if X is None else np.asarray(X, dtype=bool)
    ft, ftp = bf.part(tau), bf.part(taup)
    lhs = torus.integrate(np.where(X, np.abs(ft) ** 2 * np.abs(ftp) ** 2, 0.0))
    both = np.concatenate([tau, taup])
    sel = np.isin(bf.blocks, both)
    sq = bf.square_sum(both)
    w = ball_weight(torus, math.sqrt(S))
    g = w.convolve(torus, sq)
    NX = dilate(torus, X, math.sqrt(S))
    rhs = float(Dq) ** -2 * torus.integrate(np.where(NX, g * g, 0.0))
    ratio = lhs / rhs if rhs > 0 else 0.0
    return AuditReport(
        name="bilinear",
        parameters={"S": int(S), "D": float(Dq), "blocks": int(sel.sum()), "cells": int(X.sum())},
        measured=lhs, bound=rhs, fitted_constant=ratio, passed=bool(np.isfinite(ratio)),
    )


def counting_reports(Ss=(16, 64, 256), D=Fraction(1, 4), C=DISTANCE_C_MAX, multiple=2.0):
    """Distance-law record per S plus one per-pair stability record.

    C'(S) = D * max per-pair count; it must stay within ``multiple`` of its
    value at the smallest S.
    """
    reps, cps = [], []
    for S in Ss:
        q = count_resonant_quadruples(S, D)
        cps.append(q.fitted_C_prime)
        reps.append(AuditReport(
            "quadruple_distance_law",
            {"S": int(S), "D": float(q.D), "total": q.total, "max_offset": q.max_distance,
             "seed_C": DISTANCE_C_SEED},
            measured=q.fitted_C, bound=float(C), fitted_constant=q.fitted_C,
            passed=q.violations(C) == 0,
        ))
    c0 = cps[0]
    reps.append(AuditReport(
        "quadruple_pair_count", {"S": [int(s) for s in Ss], "D": float(Fraction(D)), "C_prime": cps},
        measured=max(cps), bound=multiple * c0, fitted_constant=c0,
        growth_exponent=growth_exponent(Ss, cps),
        passed=bool(all(c <= multiple * c0 * (1 + 1e-12) for c in cps)),
    ))
    return reps


def bilinear_reports(Ss=(64, 256), D=0.25, seed=0, multiple=2.0):
    """audit_bilinear at each S on the full torus plus a stability record."""
    reps = [audit_bilinear(bilinear_field(S, seed=seed), D) for S in Ss]
    cs = [r.fitted_constant for r in reps]
    c0 = cs[0]
    reps.append(AuditReport(
        "bilinear_stability", {"S": [int(s) for s in Ss], "D": float(D), "C": cs},
        measured=max(cs), bound=multiple * c0, fitted_constant=c0,
        growth_exponent=growth_exponent(Ss, cs),
        passed=bool(all(np.isfinite(cs)) and all(c <= multiple * c0 * (1 + 1e-12) for c in cs)),
    ))
    return reps
