import math

import numpy as np
import pytest

from smallcap.highlow import (CutoffBank, Torus, TubeLattice, audit_high_lemma2,
                              audit_locally_constant, audit_low_lemma, ball_weight, build_weights,
                              bump, classify_regions, default_alpha, prune, random_cap_field,
                              run_highlow, single_cap_field, single_packet_field,
                              square_functions, tube_profile, tube_weight)
from smallcap.geometry import build_cap_partition


@pytest.fixture(scope="module")
def random_run():
    tf = random_cap_field(256, seed=1)
    alpha = default_alpha(tf)
    hier = prune(tf, alpha)
    sq = square_functions(hier)
    return tf, hier, sq, classify_regions(sq)


def test_weights_normalized_and_peaked():
    torus = Torus(256.0)
    part = build_cap_partition(256, 0.75)
    for w in build_weights(torus, part, 1).values():
        assert abs(torus.integrate(w.values) - 1) <= 1e-6
        assert w.values[0, 0] == w.values.max()


def test_ball_weight_formula():
    torus = Torus(64.0)
    w = ball_weight(torus, 4.0)
    i4 = int(round(4.0 / torus.h))
    assert math.isclose(w.values[i4, 0] / w.values[0, 0], (1 + 16 / 16) ** -10, rel_tol=1e-12)


def test_profile_translates_sum_to_one():
    P = tube_profile()
    u = np.random.default_rng(0).uniform(0, 1, 100)
    tot = sum(P(u - m) for m in range(-12, 13))
    assert np.max(np.abs(tot - 1)) <= 1e-6


def test_profile_tail_mass():
    P = tube_profile()
    t = np.linspace(-12, 12, 200001)
    v = P(t)
    assert v[np.abs(t) > 8].sum() / v.sum() < 1e-6


@pytest.mark.parametrize("Rk,c", [(256.0, 0.25), (16.0, -0.6), (256.0 ** 0.5, 0.9)])
def test_tube_partition_of_unity(Rk, c):
    torus = Torus(256.0)
    lat = TubeLattice(torus, Rk, c)
    psi = lat.field(np.ones((lat.n1, lat.n2)))
    idx = np.random.default_rng(2).integers(0, torus.n, size=(100, 2))
    assert np.max(np.abs(psi[idx[:, 0], idx[:, 1]] - 1)) <= 1e-6
    assert np.max(np.abs(psi - 1)) <= 1e-6


def test_single_tube_toy_grid():
    lat = TubeLattice(Torus(8.0), 64.0, 0.0)
    assert lat.n_tubes == 1
    assert np.allclose(lat.field(np.ones((1, 1))), 1.0, atol=1e-9)


def test_tube_field_sup_norm_consistency():
    torus = Torus(256.0)
    lat = TubeLattice(torus, 16.0, 0.3)
    W = np.zeros((lat.n1, lat.n2))
    W[3, 5] = 1.0
    psi = lat.field(W)
    absf = np.random.default_rng(4).uniform(0.5, 1.0, (torus.n, torus.n))
    assert math.isclose(lat.sup_norms(absf)[3, 5], float(np.max(psi * absf)), rel_tol=1e-9)


def test_no_pruning_when_threshold_above_sup():
    tf = random_cap_field(256, seed=2)
    hier = prune(tf, alpha=1e-3)
    f = hier.aggregate[hier.n_levels + 1]
    assert all(v == 0 for v in hier.bad_tubes.values())
    for k in range(1, hier.n_levels + 1):
        assert np.allclose(hier.aggregate[k], f, atol=1e-12)


def test_dominant_packet_is_pruned_at_finest_level():
    tf = single_packet_field(256)
    hier = prune(tf, default_alpha(tf))
    assert hier.bad_tubes[hier.n_levels] >= 1
    assert np.abs(hier.aggregate[hier.n_levels]).max() < np.abs(hier.aggregate[hier.n_levels + 1]).max()


def test_pruning_monotone_and_band_limited(random_run):
    tf, hier, sq, regions = random_run
    assert hier.monotone_excess <= 1e-8
    assert hier.fourier_leak <= 1e-6
    assert hier.pou_error <= 1e-6


def test_square_function_single_cap_all_low():
    tf = single_cap_field(256, beta=0.5)
    sq = square_functions(prune(tf, 1.0))
    assert np.max(np.abs(sq.G_low - sq.G)) <= 1e-9 * sq.G.max()
    assert not classify_regions(sq).H.any()


def test_square_function_identities(random_run):
    tf, hier, sq, regions = random_run
    assert np.array_equal(sq.G_low + sq.G_high, sq.G)
    assert sq.G.min() >= -1e-12 * sq.G.max()
    # G dominates each of its terms
    torus, part = tf.torus, tf.partition
    par = part.parent_of_gamma("theta")
    for g in list(tf.caps)[:3]:
        gs = np.flatnonzero(par == par[g]).tolist()
        w = tube_weight(torus, part.R, float(np.mean(part.intervals("theta")[par[g]])))
        term = w.convolve(torus, np.abs(tf.piece(gs)) ** 2)
        assert np.all(sq.G >= term - 1e-9 * sq.G.max())


def test_high_part_has_no_low_frequencies(random_run):
    tf, hier, sq, regions = random_run
    bank = sq.cutoffs
    spec = np.abs(tf.torus.rfft(sq.G_high))
    low = bank.low >= 1.0
    assert spec[low].max() <= 1e-4 * np.abs(tf.torus.rfft(sq.G)).max()


def test_cutoff_bank_tiles():
    torus = Torus(256.0)
    bank = CutoffBank(torus, build_cap_partition(256, 0.75))
    assert bank.partition_error() <= 1e-12
    assert bump(0.5) == 1.0 and bump(2.5) == 0.0


def test_regions(random_run):
    tf, hier, sq, regions = random_run
    assert regions.disjoint()
    H = regions.H
    assert np.all(sq.G[H] <= 2 * np.abs(sq.G_high[H]))


def test_high_set_nonempty_for_oscillating_field():
    tf = random_cap_field(256, seed=3)
    sq = square_functions(prune(tf, default_alpha(tf)))
    regions = classify_regions(sq)
    assert regions.H.any()
    assert np.all(sq.G[regions.H] <= 2 * np.abs(sq.G_high[regions.H]))


def test_low_lemma_single_cap():
    tf = single_cap_field(256)
    hier = prune(tf, 1.0)
    assert hier.lambda1 == 1
    rep = audit_low_lemma(square_functions(hier), hier.lambda1)
    assert rep.fitted_constant <= 2.0


def test_homogeneity(random_run):
    tf, hier, sq, regions = random_run
    t = 0.5
    hier2 = prune(tf.scaled(t), hier.alpha / t)
    sq2 = square_functions(hier2)
    assert np.allclose(sq2.G, t * t * sq.G, rtol=1e-9, atol=1e-12 * sq.G.max())
    assert np.allclose(sq2.G_low, t * t * sq.G_low, atol=1e-9 * sq.G.max())
    r1, r2 = audit_high_lemma2(hier, sq), audit_high_lemma2(hier2, sq2)
    assert math.isclose(r1.fitted_constant, r2.fitted_constant, rel_tol=1e-6)
    l1, l2 = audit_locally_constant(tf), audit_locally_constant(tf.scaled(t))
    assert math.isclose(l1.fitted_constant, l2.fitted_constant, rel_tol=1e-6)


def test_low_lemma_random_fields_bounded():
    for seed in range(2):
        res = run_highlow(random_cap_field(256, seed=seed))
        low = next(r for r in res.reports if r.name == "low_lemma")
        assert low.fitted_constant <= 32
        assert all(np.isfinite(r.fitted_constant) for r in res.reports)


def test_prune_rejects_bad_input():
    tf = single_cap_field(256)
    with pytest.raises(ValueError):
        prune(tf, 0.0)
    with pytest.raises(ValueError):
        prune(tf.scaled(2.0), 1.0)
