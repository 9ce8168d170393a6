import itertools
import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from smallcap.engine import (Region, evaluate, evaluate_points, level_profile, load_field,
                             lq_lp_rhs, lq_lp_rhs_caps, moment, profile_from_csv, profile_to_csv,
                             save_field, streaming_level_areas, superlevel_measure, theorem_bound,
                             theorem_regime)
from smallcap.geometry import FrequencySet


def full_period(N, spacing=0.25):
    return evaluate(FrequencySet.standard(N), Region(0.0, 0.0, float(N), float(N * N)), spacing)


def solution_count(N, r):
    """#{(k, l) in [1, N]^r x [1, N]^r : sum k = sum l and sum k^2 = sum l^2}."""
    c = Counter((sum(t), sum(k * k for k in t)) for t in itertools.product(range(1, N + 1), repeat=r))
    return sum(v * v for v in c.values())


def quadruple_count(N):
    return sum(1 for a, b, c in itertools.product(range(1, N + 1), repeat=3)
               for d in [a + b - c] if 1 <= d <= N and a * a + b * b == c * c + d * d)


def test_value_at_origin():
    f = evaluate(FrequencySet.standard(16), Region.square(4.0))
    assert abs(f.samples[0, 0] - 16) < 1e-12


def test_single_frequency_unimodular():
    f = evaluate(FrequencySet([0.3]), Region.square(8.0), method="direct")
    assert np.allclose(np.abs(f.samples), 1.0, atol=1e-12)


def test_fast_matches_direct_offset_origin():
    freq = FrequencySet.standard(4)
    reg = Region.square(8.0, origin=(1.3, 2.7))
    fast = evaluate(freq, reg, method="fast").samples
    direct = evaluate(freq, reg, method="direct").samples
    assert np.max(np.abs(fast - direct)) / np.max(np.abs(direct)) <= 1e-9


def test_grid_matches_pointwise_sum():
    freq = FrequencySet.standard(8, coeffs=np.exp(1j * np.arange(8)))
    f = evaluate(freq, Region.square(4.0, origin=(-2.0, 5.0)))
    X, T = np.meshgrid(f.x, f.t, indexing="ij")
    pts = np.column_stack([X.ravel(), T.ravel()])
    assert np.allclose(evaluate_points(freq, pts).reshape(f.shape), f.samples, atol=1e-9)


@given(st.integers(2, 64), st.floats(-50, 50), st.floats(-50, 50))
def test_fast_equals_direct_property(N, x0, t0):
    freq = FrequencySet.standard(N)
    reg = Region(x0, t0, 4.0, 4.0)
    fast = evaluate(freq, reg, method="fast").samples
    direct = evaluate(freq, reg, method="direct").samples
    assert np.max(np.abs(fast - direct)) / max(1.0, np.max(np.abs(direct))) <= 1e-9


@pytest.mark.parametrize("N", [4, 8, 16])
def test_periodicity(N):
    freq = FrequencySet.standard(N)
    base = evaluate(freq, Region(0.3, 0.7, 4.0, 4.0)).samples
    for dx, dt in ((N, 0), (0, N * N)):
        shifted = evaluate(freq, Region(0.3 + dx, 0.7 + dt, 4.0, 4.0)).samples
        assert np.max(np.abs(shifted - base)) <= 1e-9 * N


@pytest.mark.parametrize("N", [4, 8, 16, 32])
def test_second_and_fourth_moment_full_period(N):
    f = full_period(N)
    assert abs(moment(f, 2) - N) <= 1e-9 * N
    exact4 = 2 * N * N - N
    assert quadruple_count(N) == exact4
    assert abs(moment(f, 4) - exact4) / exact4 <= 1e-6


def test_sixth_moment_matches_sextuple_count():
    N = 8
    count = solution_count(N, 3)
    f = evaluate(FrequencySet.standard(N), Region.square(float(N * N)))
    assert count == 2744  # frozen from the brute-force count
    assert abs(moment(f, 6) - count) / count <= 1e-9


def test_parseval_random_coefficients():
    rng = np.random.default_rng(3)
    N = 16
    a = rng.normal(size=N) + 1j * rng.normal(size=N)
    f = evaluate(FrequencySet.standard(N, a), Region(0.0, 0.0, float(N), float(N * N)))
    assert abs(moment(f, 2) - np.sum(np.abs(a) ** 2)) <= 1e-9 * np.sum(np.abs(a) ** 2)


@given(st.integers(2, 16), st.lists(st.floats(2, 10), min_size=2, max_size=4))
def test_holder_monotone(N, ps):
    f = evaluate(FrequencySet.standard(N), Region.square(8.0, origin=(0.5, 1.5)))
    ps = sorted(ps)
    norms = [moment(f, p) ** (1 / p) for p in ps]
    assert all(a <= b * (1 + 1e-12) for a, b in zip(norms, norms[1:]))


def test_superlevel_trivial_levels():
    freq = FrequencySet.standard(8)
    f = evaluate(freq, Region.square(16.0))
    assert superlevel_measure(f, 0.0)[0] == 16.0 ** 2
    assert superlevel_measure(f, 8.0 + 1e-9)[0] == 0.0


def test_superlevel_fine_grid_oracle():
    freq = FrequencySet.standard(8)
    coarse = evaluate(freq, Region.square(64.0), 0.25)
    fine = evaluate(freq, Region.square(64.0), 0.125)
    a_c, b_c = superlevel_measure(coarse, 4.0)
    a_f, b_f = superlevel_measure(fine, 4.0)
    assert abs(a_c - a_f) <= max(b_c, b_f)


@given(st.integers(2, 16), st.lists(st.floats(0, 16), min_size=1, max_size=6))
def test_profile_nonincreasing_and_streaming_agrees(N, alphas):
    freq = FrequencySet.standard(N)
    reg = Region.square(8.0)
    prof = level_profile(evaluate(freq, reg), alphas)
    assert np.all(np.diff(prof.areas) <= 0)
    stream = streaming_level_areas(freq, reg, alphas)
    assert np.array_equal(prof.areas, stream.areas)
    assert np.array_equal(prof.boundary_budget, stream.boundary_budget)


def test_theorem_bound_values():
    b, regime = theorem_bound(16, 256, 64.0, 16.0)
    assert regime == 1
    assert b == 16 ** 2 * 256 * 16 / 64 ** 4 == 0.0625
    assert theorem_bound(16, 64, 2.0, 16.0) == (64.0 ** 2, 3)
    # continuity at alpha^2 = R
    N, R, m = 16, 100.0, 16.0
    a = math.sqrt(R)
    assert math.isclose(N * N * R * m / a ** 4, theorem_bound(N, R, a, m)[0])
    assert theorem_regime(N, R, a) == 2


def test_theorem_bound_decays_and_rejects():
    vals = [theorem_bound(16, 64, a, 16.0)[0] for a in (9, 20, 100, 1e4)]
    assert all(x > y for x, y in zip(vals, vals[1:]))
    with pytest.raises(ValueError):
        theorem_bound(16, 8, 4.0, 16.0)
    with pytest.raises(ValueError):
        theorem_bound(16, 64, 0.0, 16.0)


def test_lq_lp_rhs_values():
    N, R = 16, 256
    ones = np.ones(N)
    assert math.isclose(lq_lp_rhs(N, R, 4, 4, ones), 96.0)
    slow = (N ** 0.5 * R ** 0.25 + N ** 0.25 * R ** 0.5) * N ** 0.25
    assert math.isclose(lq_lp_rhs(N, R, 4, 4, ones), slow)
    a = np.linspace(0.1, 2.0, N)
    lim = (N ** (5 / 6) * R ** (1 / 6) + N ** 0.5 * R ** (1 / 3)) * a.max()
    assert math.isclose(lq_lp_rhs(N, R, 6, math.inf, a), lim)
    with pytest.raises(ValueError):
        lq_lp_rhs(N, R, 3, 2, ones)


@given(st.floats(2.0, 6.0))
def test_unit_coefficient_factor(q):
    N, R = 16, 64
    p = max(3.0 / (1 - 1 / q) + 1e-9, 4.0)
    base = N ** (1 - 1 / p - 1 / q) * R ** (1 / p) + N ** (0.5 - 1 / q) * R ** (2 / p)
    assert math.isclose(lq_lp_rhs(N, R, p, q, np.ones(N)), base * N ** (1 / q))


def test_cap_form_rhs_matches_formula():
    R, b = 256.0, 0.75
    norms = np.full(8, 2.0)
    expect = (R ** (b * 0.5 - 1.75 / 6) + R ** 0.0) * (8 * 2.0 ** 2) ** 0.5
    assert math.isclose(lq_lp_rhs_caps(R, b, 6, 2, norms), expect)


def test_field_and_profile_files_round_trip(tmp_path):
    f = evaluate(FrequencySet.standard(4), Region.square(4.0))
    save_field(f, tmp_path / "f.c8")
    g = load_field(tmp_path / "f.c8")
    assert g.shape == f.shape and np.allclose(g.samples, f.samples, atol=1e-6)
    prof = level_profile(f, [0.5, 1.0, 2.0])
    back = profile_from_csv(profile_to_csv(prof))
    assert np.array_equal(back.areas, prof.areas) and np.array_equal(back.alphas, prof.alphas)


def test_rejects_coarse_spacing():
    with pytest.raises(ValueError):
        evaluate(FrequencySet.standard(4), Region.square(4.0), spacing=0.5)
