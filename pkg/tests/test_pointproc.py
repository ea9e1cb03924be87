"""Scaling sequence, exceedance patterns, serialization round trips."""

import json
import math

import numpy as np
import pytest

import exceedance_lab as xl
from exceedance_lab import io, models, pointproc, risk as rk

from conftest import binom_se, within_3se


def test_a_n_iid_closed_form():
    # P(X > a) = 1/n inverted exactly: a_100 = -1/ln(0.99)
    spec = xl.iid_frechet(1.0, seed=0)
    a = xl.compute_a_n(spec, 100)
    assert a == pytest.approx(99.49916247342216, rel=1e-12)


def test_a_n_root_matches_closed_form_for_max_ar():
    spec = xl.spatial_max_ar(2.0, 0.5, sites=3, seed=0)
    a = xl.compute_a_n(spec, 5000)
    sig = models.norm_frechet_scale(spec)
    exact = sig * (-math.log1p(-1.0 / 5000)) ** (-1.0 / 2.0)
    assert a == pytest.approx(exact, rel=1e-9)


def test_a_n_degenerate_and_small_n_warn():
    spec = xl.iid_frechet(1.0, seed=0)
    with pytest.warns(UserWarning, match="degenerate"):
        a1 = xl.compute_a_n(spec, 1)
    assert 0 < a1 < 1e-10
    with pytest.warns(UserWarning, match="asymptotic"):
        xl.compute_a_n(spec, 5)


def test_a_n_doubling_ratio_alpha_one():
    spec = xl.iid_frechet(1.0, seed=0)
    n = 10_000
    ratio = xl.compute_a_n(spec, 2 * n) / xl.compute_a_n(spec, n)
    assert abs(ratio - 2.0) < 0.01 * 2.0


def test_a_n_empirical_quantile_close_to_analytic():
    # tolerance from the quantile delta method: se = sqrt(p(1-p)/N) / f(q),
    # doubled for exceedance clustering (theta = 0.5 here)
    spec = xl.spatial_max_ar(1.0, 0.5, seed=12)
    N = pointproc.DEFAULT_PRESAMPLES
    for n in (1000, 10_000):
        a_emp = xl.compute_a_n(spec, n, method="empirical")
        a_exact = xl.compute_a_n(spec, n)
        p = 1.0 / n
        dens = spec.alpha * models.norm_frechet_scale(spec) / a_exact ** 2
        rel_se = math.sqrt(2.0) * math.sqrt(p * (1 - p) / N) / (dens * a_exact)
        assert abs(a_emp / a_exact - 1.0) < 3.0 * rel_se


def test_scaling_sequence_law():
    # n * P(||X|| > a_n) within [0.95, 1.05]; the marginal norm is exactly
    # Frechet, so probe with iid draws (1e8 keeps the band at ~5 sigma)
    spec = xl.spatial_max_ar(1.0, 0.5, seed=3)
    sig = models.norm_frechet_scale(spec)
    seq = xl.compute_scaling_sequence(spec, [1000, 10_000])
    rng = np.random.default_rng(17)
    hits = {n: 0 for n in seq.values}
    N = 10 ** 8
    chunk = 10 ** 7
    for _ in range(N // chunk):
        draws = sig * (-np.log(rng.random(chunk))) ** (-1.0 / spec.alpha)
        for n in hits:
            hits[n] += int((draws > seq[n]).sum())
    for n, a_n in seq.values.items():
        assert 0.95 <= n * (hits[n] / N) <= 1.05


def test_pattern_empty_for_zero_series():
    series = models.SpatioTemporalSeries(np.zeros((5, 2)), ("s0", "s1"))
    pat = xl.build_exceedance_pattern(series, rk.coordinate_risk(), 1.0, 2.0)
    assert len(pat) == 0


def test_pattern_definition_unwind():
    # n=2, S=1, X = (3 a u, 0.5 a u): a single point at t = 1/2 with value 3u
    a_n, u = 7.0, 1.3
    series = models.SpatioTemporalSeries(
        np.array([[3 * a_n * u], [0.5 * a_n * u]]), ("s0",))
    pat = xl.build_exceedance_pattern(series, rk.coordinate_risk(), u, a_n)
    assert len(pat) == 1
    assert pat.times[0] == 0.5
    assert pat.values[0, 0] == pytest.approx(3 * u)


def test_pattern_membership_and_time_grid():
    spec = xl.spatial_max_ar(1.0, 0.5, sites=2, seed=5)
    series = xl.simulate_series(spec, 20_000)
    a_n = xl.compute_a_n(spec, len(series))
    u = 1.0
    risk = rk.coordinate_risk()
    pat = xl.build_exceedance_pattern(series, risk, u, a_n,
                                      mark=rk.MarkFunctionalSpec())
    assert len(pat) > 0
    # every point solves r^(s)(x) > u after rescaling (homogeneity)
    for i in range(len(pat)):
        assert rk.eval_risk(risk, int(pat.site_idx[i]), pat.values[i]) > u
        j = round(float(pat.times[i]) * len(series))
        assert pat.times[i] == j / len(series) and 1 <= j <= len(series)
    # marks recomputed from the stored vectors match exactly
    re_marks = rk.site_marks(pat_mark := rk.MarkFunctionalSpec(), risk, u,
                             pat.values)[np.arange(len(pat)), pat.site_idx]
    assert np.array_equal(re_marks, pat.marks)


def test_count_law_iid():
    # mean point count = n P(X > a_n u), close to u^-alpha
    spec = xl.iid_frechet(1.0, seed=8)
    n, reps, u = 10_000, 1000, 1.0
    a_n = xl.compute_a_n(spec, n)
    counts = []
    for _, vals in xl.SeriesEnsemble(spec, n, reps).batches(500):
        counts.extend(((vals[:, :, 0] > a_n * u)).sum(axis=1))
    counts = np.asarray(counts)
    expected = n * models.norm_tail_prob(spec, a_n * u)
    assert abs(expected - u ** -1.0) < 1e-3
    se = counts.std(ddof=1) / math.sqrt(reps)
    assert within_3se(counts.mean(), expected, se)


def test_max_over_window():
    series = models.SpatioTemporalSeries(np.array([[1.0], [5.0], [2.0]]), ("s0",))
    assert xl.max_over_window(series, 2, 1) == float("-inf")
    assert xl.max_over_window(series, 2, 2) == 5.0
    assert xl.max_over_window(series, 1, 3) == 5.0
    with pytest.raises(IndexError):
        xl.max_over_window(series, 0, 2)
    with pytest.raises(IndexError):
        xl.max_over_window(series, 1, 4)


def test_pattern_json_round_trip_is_bit_exact(tmp_path):
    spec = xl.spatial_max_ar(1.0, 0.5, sites=3, seed=2)
    series = xl.simulate_series(spec, 5000)
    a_n = xl.compute_a_n(spec, 5000)
    pat = xl.build_exceedance_pattern(series, rk.sup_norm_risk(), 1.0, a_n,
                                      mark=rk.MarkFunctionalSpec())
    path = tmp_path / "pattern.json"
    pat.write_json(path)
    back = xl.PointPattern.from_json_obj(json.loads(path.read_text()))
    assert np.array_equal(back.times, pat.times)
    assert np.array_equal(back.values, pat.values)
    assert np.array_equal(back.marks, pat.marks)
    assert back.u == pat.u and back.n == pat.n


def test_pattern_csv_schema(tmp_path):
    spec = xl.spatial_max_ar(1.0, 0.5, seed=2)
    series = xl.simulate_series(spec, 2000)
    pat = xl.build_exceedance_pattern(series, rk.coordinate_risk(), 1.0,
                                      xl.compute_a_n(spec, 2000))
    path = pat.write_csv(tmp_path / "p.csv")
    raw = path.read_bytes()
    assert raw.startswith(b"# exceedance-lab schema v1\r\n")
    cols, rows = io.read_csv(path)
    assert cols == ["t", "site", "x_s0"]
    assert len(rows) == len(pat)
    if rows:
        # repr round trip: parsing the CSV text recovers the exact floats
        assert float(rows[0][0]) == pat.times[0]
        assert float(rows[0][2]) == pat.values[0, 0]
