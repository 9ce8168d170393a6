import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from scipy.integrate import trapezoid
from hypothesis import strategies as st

from smallcap.sharp import (MajorArc, arc_amplitude, arc_amplitude_audit, arcs_to_csv,
                            block_constancy_ratio, case2_audit, check_disjoint,
                            enumerate_major_arcs, find_shift_v, generate_example, max_window_count,
                            reduced_fractions, smoothed_box, totient_gcd, totient_sum,
                            totient_sum_gcd, totients)


def arc_oracle(N):
    """(q, a, b) by triple loop; reducedness checked through Fraction."""
    out = []
    q = 1
    while q * q * q <= N * N:
        for b in range(1, q + 1):
            for a in range(q + 1):
                if q % 2 and Fraction(b, q).denominator == q:
                    out.append((q, a, b))
        q += 1
    return sorted(out)


def tuples(arcs):
    return sorted((a.q, a.a, a.b) for a in arcs)


def test_arcs_small_cases():
    assert tuples(enumerate_major_arcs(8)) == arc_oracle(8)
    assert len(enumerate_major_arcs(8)) == 10
    assert {a.q for a in enumerate_major_arcs(8)} == {1, 3}
    assert tuples(enumerate_major_arcs(2)) == [(1, 0, 1), (1, 1, 1)]


def test_arcs_n64_odd_and_exact():
    arcs = enumerate_major_arcs(64)
    assert tuples(arcs) == arc_oracle(64)
    assert all(a.q % 2 == 1 for a in arcs)


def test_disjointness():
    assert check_disjoint(enumerate_major_arcs(8))
    assert check_disjoint(enumerate_major_arcs(8)[:1])
    # inflating the radius to N^(1/3) makes neighbouring boxes collide
    assert not check_disjoint(enumerate_major_arcs(8), radius=Fraction(2))


def test_fraction_separation():
    fr = reduced_fractions(16)
    for x, y in zip(fr, fr[1:]):
        assert y - x >= Fraction(1, x.denominator * y.denominator)


def test_amplitude_at_periodic_image_of_origin():
    arc = MajorArc(1, 1, 1, 16)
    assert arc.center == (16.0, 256.0)
    assert math.isclose(arc_amplitude(arc), 16.0, rel_tol=1e-9)


def test_amplitude_n27_q3():
    arcs = [a for a in enumerate_major_arcs(27) if a.q == 3]
    target = 27 / math.sqrt(3)
    for arc in arcs:
        assert target / 4 <= arc_amplitude(arc) <= 4 * target


def test_amplitude_audit_n64():
    rep, arcs, vals, ratio = arc_amplitude_audit(64)
    assert rep.passed and rep.measured <= 4
    text = arcs_to_csv(arcs, vals, ratio)
    assert text.splitlines()[0] == "q,a,b,center_x,center_t,amplitude,ratio"
    assert len(text.splitlines()) == len(arcs) + 1


def test_totients():
    assert totients(1)[1] == 1
    assert sum(totient_gcd(q) for q in range(1, 11)) == 32
    assert int(totients(10)[1:].sum()) == 32
    phi = totients(512)
    assert all(phi[q] == totient_gcd(q) for q in range(1, 513))


def test_totient_sum_asymptotic_band():
    Q = 128
    total = totient_sum(Q)
    assert total == totient_sum_gcd(Q)
    approx = 3 / math.pi ** 2 * ((2 * Q) ** 2 - Q ** 2)
    assert abs(total - approx) <= 0.1 * approx


def test_shift_whole_window_counts_all_fractions():
    N, alpha = 16, 4.5
    v, count = find_shift_v(N, N * N, alpha)
    q_cap = min(6, int(N * N / (16 * alpha * alpha)))
    assert count == len(reduced_fractions(q_cap))


def window_scan(points, width, step=1e-4):
    pts = np.asarray(points)
    best = 0
    for c in np.arange(0.0, 1.0 - width + step, step):
        best = max(best, int(np.sum((pts >= c) & (pts <= c + width))))
    return best


def test_shift_small_case_matches_scan():
    # N^2 / (16 alpha^2) = 2 sits below the regime, so the precondition is relaxed
    N, R = 16, 64
    alpha = math.sqrt(N * N / 32)
    v, count = find_shift_v(N, R, alpha, strict=False)
    pts = [float(f) for f in reduced_fractions(2)]
    assert count == window_scan(pts, R / N ** 2)


def test_window_count_matches_scan():
    pts = [float(f) for f in reduced_fractions(16)]
    width = 0.05
    count, c = max_window_count(pts, width)
    assert window_scan(pts, width) <= count <= window_scan(pts, width + 2e-4)
    assert np.sum((np.array(pts) >= c - 1e-15) & (np.array(pts) <= c + width + 1e-15)) == count


@given(st.floats(0.001, 0.5), st.floats(0.001, 0.5))
def test_window_count_monotone(w1, w2):
    pts = [float(f) for f in reduced_fractions(12)]
    lo, hi = sorted((w1, w2))
    assert max_window_count(pts, lo)[0] <= max_window_count(pts, hi)[0]


def test_shift_rejects_out_of_regime():
    with pytest.raises(ValueError):
        find_shift_v(16, 64, 2.0)


def test_case2_audit_cases():
    rep = case2_audit(16, 64.0, 17.0)  # alpha > N: |F| <= N, so nothing is measured
    assert rep.measured == 0 and rep.fitted_constant == 0
    rep = case2_audit(16, 64.0, 8.0)
    assert rep.fitted_constant > 0 and rep.passed


def test_smoothed_box_profile():
    u = np.linspace(-2, 2, 4001)
    s = smoothed_box(u)
    assert s.max() <= 1 + 1e-12 and s.min() >= 0
    assert abs(smoothed_box(0.0) - 1) < 1e-9
    assert abs(trapezoid(s, u) - 1) < 1e-6


@pytest.mark.parametrize("R", [256, 1024])
def test_constructive_peak(R):
    f = generate_example("constructive", R, 0.75)
    i, j = np.argmin(np.abs(f.x)), np.argmin(np.abs(f.t))
    assert 0.25 <= abs(f.samples[i, j]) / R ** 0.75 <= 4


@pytest.mark.parametrize("R", [256, 1024])
def test_block_constant_on_dual_block(R):
    assert block_constancy_ratio(generate_example("block", R, 0.75), R) <= 4


def test_square_root_band_stable():
    def stat(R, seed):
        f = generate_example("square_root", R, 0.75, seed=seed)
        return np.sum(np.abs(f.samples) ** 6) * f.spacing ** 2 / (R ** 2.25 * R ** 2)

    c256 = np.median([stat(256, s) for s in range(8)])
    c1024 = np.median([stat(1024, s) for s in range(8)])
    assert 0.5 * c256 <= c1024 <= 2 * c256


def test_generate_rejects_unknown_kind():
    with pytest.raises(ValueError):
        generate_example("nope", 256)
