"""The limit point process: a Poisson number of independent clusters.

The weak limit of the exceedance patterns is, in distribution, a
superposition of T ~ Poisson(theta) independent cluster processes, each
stamped with its own uniform time label; only forward lags j >= 0 can
survive the threshold u (backward cluster lags have norm <= 1 and the risk
bound caps their risk at u).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

from . import models, risk as riskmod, seeding, tailproc
from .models import ModelSpec
from .pointproc import PointPattern
from .tailproc import PathEnsemble


def _resolve_theta(spec: ModelSpec, theta) -> float:
    if theta is None or theta == "analytic":
        return models.analytic_extremal_index(spec)
    if isinstance(theta, tailproc.ThetaEstimate):
        return theta.value
    return float(theta)


@dataclass
class SuperpositionSample:
    """One draw of the limit process.

    cluster_* arrays describe the raw clusters (compact one-hot paths over
    lagsifts -m..m); point_* arrays hold the thresholded points (forward lags
    only, risk above u). Marks are attached when a mark functional was
    requested.
    """

    cluster_count: int
    cluster_times: np.ndarray       # (T,)
    cluster_values: np.ndarray      # (T, 2m+1) one-hot norms
    cluster_sites: np.ndarray       # (T,)
    lags: np.ndarray                # (2m+1,)
    point_times: np.ndarray         # (K,)
    point_sites: np.ndarray         # (K,)
    point_values: np.ndarray        # (K, S)
    point_lags: np.ndarray          # (K,)
    point_cluster: np.ndarray       # (K,)
    point_marks: Optional[np.ndarray]
    u: float
    theta: float

    def __len__(self) -> int:
        return len(self.point_times)


def _threshold_cluster_points(ens: PathEnsemble, times: np.ndarray,
                              rspec: riskmod.RiskFunctionalSpec, u: float,
                              n_sites: int,
                              mark: Optional[riskmod.MarkFunctionalSpec],
                              min_lag: int = 0):
    """Retained points (cluster, lag, site) with r^(s)(Z_j) > u, lag >= min_lag."""
    m = ens.window
    rmat = riskmod.unit_vector_risks(rspec, n_sites)        # [s, s*]
    lag_keep = ens.lags >= min_lag
    vals = ens.values[:, lag_keep]                          # (T, L')
    lags = ens.lags[lag_keep]
    # risks of val * e_{site}: val * rmat[s, site]
    rm_cols = rmat[:, ens.site]                             # (S, T)
    exceed = vals[:, :, None] * rm_cols.T[:, None, :] > u   # (T, L', S)
    ci, li, si = np.nonzero(exceed)
    point_values = np.zeros((len(ci), n_sites))
    point_values[np.arange(len(ci)), ens.site[ci]] = vals[ci, li]
    marks = None
    if mark is not None:
        marks = riskmod.site_marks(mark, rspec, u, point_values)[
            np.arange(len(ci)), si]
    return ci, lags[li], si, point_values, marks


def sample_limit_process(spec: ModelSpec, risk: riskmod.RiskFunctionalSpec,
                         u: float, rng,
                         mark: Optional[riskmod.MarkFunctionalSpec] = None,
                         m: Optional[int] = None,
                         theta="analytic") -> SuperpositionSample:
    """Draw the limit process once.

    T ~ Poisson(theta); each of the T clusters is an independent draw of
    the conditioned tail path with its own uniform time; points keep the
    cluster's time and the lag-j vector when r^(s)(Z_j) > u, j >= 0.
    """
    rng = seeding.as_generator(rng)
    if m is None:
        m = tailproc.default_window(spec)
    th = _resolve_theta(spec, theta)
    T = int(rng.poisson(th))
    if T == 0:
        empty = np.empty(0)
        return SuperpositionSample(
            cluster_count=0, cluster_times=empty,
            cluster_values=np.empty((0, 2 * m + 1)),
            cluster_sites=np.empty(0, dtype=np.int64),
            lags=np.arange(-m, m + 1),
            point_times=empty, point_sites=np.empty(0, dtype=np.int64),
            point_values=np.empty((0, spec.n_sites)),
            point_lags=np.empty(0, dtype=np.int64),
            point_cluster=np.empty(0, dtype=np.int64),
            point_marks=None if mark is None else empty.copy(),
            u=float(u), theta=th)
    ens, times, _ = tailproc.cluster_ensemble(spec, m, T, rng)
    ci, lags, si, pvals, marks = _threshold_cluster_points(
        ens, times, risk, u, spec.n_sites, mark, min_lag=0)
    return SuperpositionSample(
        cluster_count=T, cluster_times=times, cluster_values=ens.values,
        cluster_sites=ens.site, lags=ens.lags,
        point_times=times[ci], point_sites=si, point_values=pvals,
        point_lags=lags, point_cluster=ci, point_marks=marks,
        u=float(u), theta=th)


def superposition_to_pattern(sample: SuperpositionSample,
                             sites: Tuple[str, ...]) -> PointPattern:
    """Flatten a superposition draw to the common pattern type; cluster
    identity is kept as an auxiliary column."""
    return PointPattern(
        times=sample.point_times.copy(),
        site_idx=sample.point_sites.copy(),
        values=sample.point_values.copy(),
        u=sample.u,
        sites=sites,
        n=None,
        marks=None if sample.point_marks is None else sample.point_marks.copy(),
        cluster_ids=sample.point_cluster.copy(),
    )


def superposition_batch(spec: ModelSpec, reps: int, rng,
                        m: Optional[int] = None, theta="analytic"):
    """Vectorized draws for estimators and distributional tests.

    Returns (T, sample_idx, times, ens) where T is the (reps,) vector of
    cluster counts and ens/times/sample_idx describe all clusters of all
    samples, grouped by the sample index.
    """
    rng = seeding.as_generator(rng)
    if m is None:
        m = tailproc.default_window(spec)
    th = _resolve_theta(spec, theta)
    T = rng.poisson(th, size=reps)
    total = int(T.sum())
    sample_idx = np.repeat(np.arange(reps), T)
    if total == 0:
        ens = PathEnsemble(lags=np.arange(-m, m + 1),
                           values=np.empty((0, 2 * m + 1)),
                           site=np.empty(0, dtype=np.int64),
                           normalization="tail")
        return T, sample_idx, np.empty(0), ens
    ens, times, _ = tailproc.cluster_ensemble(spec, m, total, rng)
    return T, sample_idx, times, ens
