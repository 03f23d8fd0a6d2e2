import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import naive_auc_judd, naive_cc, naive_kldiv, naive_nss, naive_sim
from salengine.errors import DegenerateMapError, DimensionError
from salengine.metrics import (
    FixationMap,
    MetricReport,
    auc_judd,
    average_reports,
    cc,
    kldiv,
    loss,
    nss,
    score_frame,
    sim,
)

# Hand-derived frozen values (computed with the naive oracles up front).
KLDIV_HAND = 0.6931469805599654  # Q=[1,0], P=[.5,.5]: log(1/(0.5+1e-7))
NSS_2X2_SINGLE = 1.7320508075688772  # (1 - 1/4) / (sqrt(3)/4) = sqrt(3)


def random_maps(rng, shape=(4, 4)):
    return rng.random(shape) + 0.01, rng.random(shape) + 0.01


def random_fixations(rng, shape=(4, 4)):
    mask = rng.random(shape) < 0.3
    if not mask.any():
        mask.flat[int(rng.integers(mask.size))] = True
    return mask


# ---------------------------------------------------------------------------
# CC
# ---------------------------------------------------------------------------


def test_cc_self_correlation(rng):
    p = rng.random((4, 4))
    assert cc(p, p) == pytest.approx(1.0, abs=1e-12)


def test_cc_affine_invariance(rng):
    q = rng.random((5, 5))
    assert cc(3.0 * q + 2.0, q) == pytest.approx(1.0, abs=1e-12)
    assert cc(-q, q) == pytest.approx(-1.0, abs=1e-12)


def test_cc_zero_variance_rule(rng):
    assert cc(np.full((3, 3), 0.5), rng.random((3, 3))) == 0.0


def test_cc_matches_oracle(rng):
    for _ in range(50):
        p, q = random_maps(rng)
        assert cc(p, q) == pytest.approx(naive_cc(p, q), abs=1e-6)


def test_cc_symmetry(rng):
    for _ in range(20):
        p, q = random_maps(rng, (6, 6))
        assert abs(cc(p, q) - cc(q, p)) <= 1e-7


def test_cc_dim_mismatch():
    with pytest.raises(DimensionError):
        cc(np.zeros((2, 2)), np.zeros((3, 3)))


# ---------------------------------------------------------------------------
# KLDiv
# ---------------------------------------------------------------------------


def test_kldiv_self_is_near_zero(rng):
    p = rng.random((4, 4)) + 0.1
    assert abs(kldiv(p, p)) <= 1e-5


def test_kldiv_hand_value():
    assert kldiv(np.array([0.5, 0.5]), np.array([1.0, 0.0])) == pytest.approx(
        KLDIV_HAND, abs=1e-9
    )


def test_kldiv_nonnegative_up_to_eps(rng):
    for _ in range(50):
        p, q = random_maps(rng)
        assert kldiv(p, q) >= -1e-5


def test_kldiv_matches_oracle(rng):
    for _ in range(50):
        p, q = random_maps(rng)
        assert kldiv(p, q) == pytest.approx(naive_kldiv(p, q), abs=1e-5)


def test_kldiv_degenerate_maps():
    with pytest.raises(DegenerateMapError):
        kldiv(np.zeros((2, 2)), np.ones((2, 2)))
    with pytest.raises(DegenerateMapError):
        kldiv(np.ones((2, 2)), np.zeros((2, 2)))


# ---------------------------------------------------------------------------
# SIM
# ---------------------------------------------------------------------------


def test_sim_fixed_points(rng):
    p = rng.random((4, 4)) + 0.1
    assert sim(p, p) == pytest.approx(1.0, abs=1e-12)
    a = np.array([1.0, 0.0]).reshape(1, 2)
    b = np.array([0.0, 1.0]).reshape(1, 2)
    assert sim(a, b) == 0.0
    assert sim(np.array([0.5, 0.5]), np.array([1.0, 0.0])) == pytest.approx(0.5)


def test_sim_matches_oracle_and_bounds(rng):
    for _ in range(50):
        p, q = random_maps(rng)
        s = sim(p, q)
        assert s == pytest.approx(naive_sim(p, q), abs=1e-6)
        assert 0.0 <= s <= 1.0
        assert s == pytest.approx(sim(q, p), abs=1e-12)


# ---------------------------------------------------------------------------
# NSS
# ---------------------------------------------------------------------------


def test_nss_constant_prediction_is_zero():
    fix = FixationMap(np.eye(3))
    assert nss(np.full((3, 3), 0.4), fix) == 0.0


def test_nss_single_fixation_hand_value():
    p = np.array([[1.0, 0.0], [0.0, 0.0]])
    fix = FixationMap(np.array([[1, 0], [0, 0]]))
    assert nss(p, fix) == pytest.approx(NSS_2X2_SINGLE, abs=1e-9)


def test_nss_matches_oracle(rng):
    for _ in range(50):
        p = rng.random((5, 5))
        f = random_fixations(rng, (5, 5))
        assert nss(p, FixationMap(f)) == pytest.approx(naive_nss(p, f), abs=1e-6)


def test_nss_affine_invariance(rng):
    p = rng.random((5, 5))
    f = FixationMap(random_fixations(rng, (5, 5)))
    base = nss(p, f)
    assert nss(7.0 * p + 3.0, f) == pytest.approx(base, abs=1e-6)


def test_nss_requires_fixations():
    with pytest.raises(DegenerateMapError):
        nss(np.ones((2, 2)), FixationMap(np.zeros((2, 2))))
    with pytest.raises(DimensionError):
        nss(np.ones((2, 2)), FixationMap(np.ones((3, 3))))


# ---------------------------------------------------------------------------
# AUC-Judd
# ---------------------------------------------------------------------------


def test_auc_perfect_separation():
    p = np.array([[0.9, 0.1], [0.8, 0.2]])
    fix = FixationMap(np.array([[1, 0], [1, 0]]))
    assert auc_judd(p, fix) == pytest.approx(1.0)


def test_auc_constant_prediction_is_chance():
    fix = FixationMap(np.array([[1, 0], [0, 1]]))
    assert auc_judd(np.full((2, 2), 0.3), fix) == pytest.approx(0.5)


def test_auc_matches_bruteforce_oracle(rng):
    for _ in range(50):
        p = rng.random((4, 4))
        f = random_fixations(rng, (4, 4))
        assert auc_judd(p, FixationMap(f)) == pytest.approx(
            naive_auc_judd(p, f), abs=1e-9
        )


def test_auc_rank_invariance_exact(rng):
    p = rng.random((6, 6)) + 0.5
    f = FixationMap(random_fixations(rng, (6, 6)))
    base = auc_judd(p, f)
    assert auc_judd(2.0 * p + 3.0, f) == base
    assert auc_judd(p**3, f) == base
    assert auc_judd(np.exp(p), f) == base


# ---------------------------------------------------------------------------
# loss and report plumbing
# ---------------------------------------------------------------------------


def test_loss_fixed_point(rng):
    p = rng.random((4, 4)) + 0.1
    assert loss(p, p) == pytest.approx(-1.0, abs=1e-5)


def test_loss_constant_prediction(rng):
    q = rng.random((4, 4)) + 0.1
    p = np.full((4, 4), 0.25)
    assert loss(p, q) == pytest.approx(kldiv(p, q), abs=1e-12)


def test_loss_composes(rng):
    p, q = random_maps(rng)
    assert loss(p, q) == pytest.approx(kldiv(p, q) - cc(p, q), abs=1e-12)


@given(seed=st.integers(0, 2**31))
@settings(max_examples=25, deadline=None)
def test_metric_properties_hypothesis(seed):
    rng = np.random.default_rng(seed)
    p = rng.random((4, 4)) + 0.01
    q = rng.random((4, 4)) + 0.01
    assert abs(cc(p, q)) <= 1.0 + 1e-12
    assert 0.0 <= sim(p, q) <= 1.0
    assert kldiv(p, q) >= -1e-5
    f = random_fixations(rng, (4, 4))
    assert 0.0 <= auc_judd(p, FixationMap(f)) <= 1.0


def test_score_frame_and_report(rng):
    p = rng.random((4, 4)) + 0.1
    f = random_fixations(rng, (4, 4))
    full = score_frame("f0", p, p, FixationMap(f))
    assert full.cc == pytest.approx(1.0)
    assert full.nss is not None and full.auc_j is not None
    partial = score_frame("f1", p, p, None)
    assert partial.nss is None and partial.auc_j is None
    report = MetricReport(frames=(full,))
    assert report.mean("cc") == pytest.approx(1.0)
    report2 = MetricReport(frames=(partial,), skipped=("nss", "auc_j"))
    assert report2.mean("nss") is None
    avg = average_reports([report, report])
    assert avg["cc"] == pytest.approx(1.0)
    assert math.isclose(avg["sim"], 1.0, abs_tol=1e-9)
