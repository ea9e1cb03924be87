"""Risk and mark functionals: pointwise values, homogeneity, certificates."""

import numpy as np
import pytest

import exceedance_lab as xl
from exceedance_lab import risk as rk


def test_sup_norm_includes_every_site():
    spec = rk.sup_norm_risk()
    x = np.array([1.0, 3.0])
    assert rk.eval_risk(spec, 0, x) == 3.0
    assert rk.eval_risk(spec, 1, x) == 3.0


def test_argmax_selects_single_site():
    spec = rk.argmax_risk()
    x = np.array([1.0, 3.0])
    assert rk.eval_risk(spec, 0, x) == 0.0
    assert rk.eval_risk(spec, 1, x) == 3.0


def test_coordinate_at_origin():
    spec = rk.coordinate_risk()
    assert rk.eval_risk(spec, 2, np.zeros(4)) == 0.0


def test_unknown_site_raises():
    with pytest.raises(KeyError):
        rk.eval_risk(rk.coordinate_risk(), 5, np.ones(3))


@pytest.mark.parametrize("spec", [rk.sup_norm_risk(), rk.coordinate_risk(),
                                  rk.argmax_risk(),
                                  rk.user_table_risk(lambda s, x: 2.0 * x[..., s])])
def test_positive_homogeneity(spec):
    rng = np.random.default_rng(17)
    x = rng.random((1000, 3))
    c = 10.0 ** rng.uniform(-4, 4, size=1000)
    r0 = rk.site_risks(spec, x)
    r1 = rk.site_risks(spec, c[:, None] * x)
    bound = 1e-12 * (c * x.max(axis=1))[:, None]
    assert np.all(np.abs(r1 - c[:, None] * r0) <= bound)


def test_continuity_at_origin_along_rays():
    rng = np.random.default_rng(3)
    rays = rng.random((50, 4))
    for spec in (rk.sup_norm_risk(), rk.coordinate_risk(), rk.argmax_risk()):
        vals = rk.site_risks(spec, 1e-9 * rays)
        assert np.all(vals <= 1e-9 * rays.max(axis=1, keepdims=True) + 1e-30)


def test_certificates():
    rng = np.random.default_rng(0)
    cert = rk.certify_risk_bound(rk.sup_norm_risk(), 1.0, 2000, rng, n_sites=3)
    assert cert.satisfied and cert.u_min <= 1.0 + 1e-12
    cert = rk.certify_risk_bound(rk.coordinate_risk(), 1.0, 2000, rng, n_sites=3)
    assert cert.satisfied
    double = rk.user_table_risk(lambda s, x: 2.0 * x[..., s])
    fail = rk.certify_risk_bound(double, 1.0, 2000, rng, n_sites=3)
    assert not fail.satisfied
    assert fail.witness is not None
    assert fail.u_min == pytest.approx(2.0, rel=0.05)
    ok = rk.certify_risk_bound(double, 2.0, 2000, rng, n_sites=3)
    assert ok.satisfied


def test_user_table_homogeneity_validated_at_load():
    with pytest.raises(ValueError, match="homogeneous"):
        rk.user_table_risk(lambda s, x: x[..., s] + 1.0)


def test_affected_fraction_mark():
    risk = rk.coordinate_risk()
    mark = rk.MarkFunctionalSpec(kind=rk.AFFECTED_FRACTION)
    u = 1.5
    x = np.array([2 * u, 2 * u, 0.0, 0.0])
    assert rk.eval_mark(mark, risk, u, 0, x) == 0.5
    assert rk.eval_mark(mark, risk, u, 3, x) == 0.5  # same at every site
    assert rk.eval_mark(mark, risk, u, 0, np.zeros(4)) == 0.0
    assert rk.eval_mark(mark, risk, u, 0, np.array([2 * u])) == 1.0


def test_mark_values_quantized_to_site_fractions():
    rng = np.random.default_rng(9)
    risk = rk.coordinate_risk()
    mark = rk.MarkFunctionalSpec(kind=rk.AFFECTED_FRACTION)
    x = rng.random((500, 5)) * 3
    marks = rk.site_marks(mark, risk, 1.0, x)
    assert np.all((marks >= 0) & (marks <= 1))
    assert np.allclose(marks * 5, np.round(marks * 5))


def test_same_as_risk_mark():
    risk = rk.sup_norm_risk()
    mark = rk.MarkFunctionalSpec(kind=rk.SAME_AS_RISK)
    x = np.array([1.0, 4.0])
    assert rk.eval_mark(mark, risk, 1.0, 0, x) == rk.eval_risk(risk, 0, x)


def test_exceedance_cardinality_on_simulated_patterns():
    # one extreme time: sup-norm emits |S| points, argmax exactly 1,
    # coordinate at least 1
    spec = xl.spatial_max_ar(1.0, 0.5, sites=4, seed=77)
    series = xl.simulate_series(spec, 50_000)
    a_n = xl.compute_a_n(spec, len(series))
    for risk, expect in ((rk.sup_norm_risk(), "all"),
                         (rk.argmax_risk(), "one"),
                         (rk.coordinate_risk(), "some")):
        pat = xl.build_exceedance_pattern(series, risk, 1.0, a_n)
        if len(pat) == 0:
            continue
        times, counts = np.unique(pat.times, return_counts=True)
        if expect == "all":
            assert (counts == 4).all()
        elif expect == "one":
            assert (counts == 1).all()
        else:
            assert (counts >= 1).all()
