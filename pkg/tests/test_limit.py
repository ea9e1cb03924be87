"""Compound-Poisson limit process: counts, times, thresholding identity."""

import math

import numpy as np
import pytest
from scipy import stats

import exceedance_lab as xl
from exceedance_lab import limit, risk as rk, tailproc

from conftest import poisson_chisquare_p, within_3se


def test_empty_draw_is_valid():
    spec = xl.iid_frechet(1.0, seed=1)
    rng = np.random.default_rng(0)
    found_empty = False
    for _ in range(50):
        s = xl.sample_limit_process(spec, rk.coordinate_risk(), 1.0, rng)
        if s.cluster_count == 0:
            assert len(s) == 0
            found_empty = True
            break
    assert found_empty  # P(T = 0) = e^-1


def test_points_share_cluster_time_and_satisfy_threshold():
    spec = xl.spatial_max_ar(1.0, 0.5, sites=3, seed=2)
    rng = np.random.default_rng(1)
    risk = rk.coordinate_risk()
    for _ in range(30):
        s = xl.sample_limit_process(spec, risk, 1.0, rng,
                                    mark=rk.MarkFunctionalSpec())
        for i in range(len(s)):
            c = s.point_cluster[i]
            assert s.point_times[i] == s.cluster_times[c]
            assert s.point_lags[i] >= 0
            r = rk.eval_risk(risk, int(s.point_sites[i]), s.point_values[i])
            assert r > s.u
            # marks recomputed from the stored vector match exactly
            m = rk.eval_mark(rk.MarkFunctionalSpec(), risk, s.u,
                             int(s.point_sites[i]), s.point_values[i])
            assert m == s.point_marks[i]


def test_iid_expected_point_count_is_theta_times_tail():
    # a=0, u=1: each cluster yields one point iff P > u; E[total] = theta u^-alpha
    spec = xl.iid_frechet(1.0, seed=3)
    rng = np.random.default_rng(7)
    T, sample_idx, times, ens = limit.superposition_batch(spec, 50_000, rng)
    retained = (ens.forward_values(0) > 1.0).sum(axis=1)
    per_sample = np.zeros(50_000)
    np.add.at(per_sample, sample_idx, retained)
    se = per_sample.std(ddof=1) / math.sqrt(len(per_sample))
    assert within_3se(per_sample.mean(), 1.0, se)


def test_cluster_size_above_u_is_inverse_theta():
    spec = xl.spatial_max_ar(1.0, 0.5, seed=4)
    rng = np.random.default_rng(8)
    ens, _, _ = tailproc.cluster_ensemble(
        spec, tailproc.default_window(spec), 50_000, rng)
    cnt = (ens.forward_values(0) > 1.0).sum(axis=1)
    se = cnt.std(ddof=1) / math.sqrt(len(cnt))
    assert within_3se(cnt.mean(), 2.0, se)


@pytest.mark.parametrize("a,alpha", [(0.0, 1.0), (0.5, 1.0), (0.5, 2.0)])
def test_cluster_count_poisson(a, alpha):
    spec = xl.spatial_max_ar(alpha, a, seed=5)
    rng = np.random.default_rng(101)
    T, _, _, _ = limit.superposition_batch(spec, 10_000, rng)
    p = poisson_chisquare_p(T, 1 - a ** alpha)
    assert p > 0.01


def test_cluster_times_uniform():
    spec = xl.spatial_max_ar(1.0, 0.5, seed=6)
    rng = np.random.default_rng(12)
    _, _, times, _ = limit.superposition_batch(spec, 10_000, rng)
    assert stats.kstest(times, "uniform").pvalue > 0.01


def test_threshold_identity_backward_lags_never_contribute():
    # patterns from lags [-m, inf) equal patterns from [0, inf) exactly
    spec = xl.spatial_max_ar(1.0, 0.5, sites=2, seed=7)
    rng = np.random.default_rng(13)
    risk = rk.sup_norm_risk()
    m = tailproc.default_window(spec)
    for _ in range(200):
        T = int(rng.poisson(0.5))
        if T == 0:
            continue
        ens, times, _ = tailproc.cluster_ensemble(spec, m, T, rng)
        full = limit._threshold_cluster_points(ens, times, risk, 1.0, 2,
                                               None, min_lag=-m)
        fwd = limit._threshold_cluster_points(ens, times, risk, 1.0, 2,
                                              None, min_lag=0)
        assert np.array_equal(full[0], fwd[0])
        assert np.array_equal(full[1], fwd[1])
        assert np.array_equal(full[3], fwd[3])


def test_superposition_to_pattern_preserves_points():
    spec = xl.spatial_max_ar(1.0, 0.5, sites=2, seed=8)
    rng = np.random.default_rng(14)
    s = None
    while s is None or len(s) == 0:
        s = xl.sample_limit_process(spec, rk.coordinate_risk(), 1.0, rng)
    pat = xl.superposition_to_pattern(s, spec.sites)
    assert len(pat) == len(s)
    assert pat.n is None
    assert np.array_equal(pat.cluster_ids, s.point_cluster)
    assert np.array_equal(pat.values, s.point_values)


def test_theta_override():
    spec = xl.spatial_max_ar(1.0, 0.5, seed=9)
    rng = np.random.default_rng(15)
    T, _, _, _ = limit.superposition_batch(spec, 20_000, rng, theta=2.5)
    assert abs(T.mean() - 2.5) < 3 * T.std(ddof=1) / math.sqrt(len(T))
