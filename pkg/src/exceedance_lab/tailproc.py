"""Tail-process machinery: samplers, empirical estimation, extremal index.

Closed-form tail paths come from :mod:`.models`; this module adds the
spectral/tail normalization choice, the empirical conditional-window
estimator, the conditioned cluster law (rejection sampling), and two
extremal-index estimators (tail-path Monte Carlo and the finite-n blocks
ratio).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np

from . import models, seeding
from .models import ModelSpec, SeriesEnsemble, SpatioTemporalSeries
from .types import SPECTRAL, TAIL, TailPath


class TooFewExceedancesError(Exception):
    pass


class RejectionBudgetError(Exception):
    def __init__(self, msg, theta_estimate):
        super().__init__(msg)
        self.theta_estimate = theta_estimate


class ZeroDenominatorError(Exception):
    pass


# ---------------------------------------------------------------------------
# compact ensembles (internal fast path)

@dataclass
class PathEnsemble:
    """One-hot tail-path ensemble: values[r, k] is the norm at lag k - m of
    path r, which lives entirely on site[r]."""

    lags: np.ndarray          # (L,)
    values: np.ndarray        # (R, L)
    site: np.ndarray          # (R,)
    normalization: str

    @property
    def window(self) -> int:
        return int(self.lags.max())

    def __len__(self) -> int:
        return self.values.shape[0]

    def forward_values(self, from_lag: int = 0) -> np.ndarray:
        m = self.window
        return self.values[:, m + from_lag:]

    def backward_max(self) -> np.ndarray:
        m = self.window
        if m == 0:
            return np.zeros(len(self))
        return self.values[:, :m].max(axis=1)

    def path(self, r: int, n_sites: int) -> TailPath:
        vectors = np.zeros((self.values.shape[1], n_sites))
        vectors[:, self.site[r]] = self.values[r]
        return TailPath(self.lags.copy(), vectors, self.normalization)


def sample_path_ensemble(spec: ModelSpec, m: int, reps: int, rng,
                         normalization: str = TAIL) -> PathEnsemble:
    rng = seeding.as_generator(rng)
    values, site = models._analytic_path_batch(spec, m, reps, rng, normalization)
    return PathEnsemble(lags=np.arange(-m, m + 1), values=values, site=site,
                        normalization=normalization)


def sample_tail_path(spec: ModelSpec, m: int, rng,
                     normalization: str = TAIL) -> TailPath:
    """One tail-process sample over lags [-m, m] in the requested
    normalization. Delegates to the model's closed form."""
    rng = seeding.as_generator(rng)
    path = models.analytic_tail_path(spec, m, rng)
    if normalization == SPECTRAL:
        return path.to_spectral()
    return path


# ---------------------------------------------------------------------------
# empirical tail paths

@dataclass
class EmpiricalPathEnsemble:
    """Windows of the series around exceedance anchors, rescaled."""

    lags: np.ndarray          # (L,)
    vectors: np.ndarray       # (N, L, S)
    normalization: str
    threshold: float

    def __len__(self) -> int:
        return self.vectors.shape[0]

    def norm_matrix(self) -> np.ndarray:
        return self.vectors.max(axis=2)

    def paths(self) -> Iterable[TailPath]:
        for i in range(len(self)):
            yield TailPath(self.lags.copy(), self.vectors[i], self.normalization)


def _iter_value_batches(ensemble, batch_size=256):
    if isinstance(ensemble, SeriesEnsemble):
        yield from ensemble.batches(batch_size)
    else:
        series_list = list(ensemble)
        vals = np.stack([s.values for s in series_list])
        yield np.arange(len(series_list)), vals


def empirical_tail_path(ensemble, x_threshold: float, m: int,
                        normalization: str = TAIL,
                        min_exceedances: int = 200) -> EmpiricalPathEnsemble:
    """Conditional windows around times with ||X_t|| > x_threshold.

    Collects {X_{t+j} / b : -m <= j <= m} over anchors t, with b = ||X_t||
    for the spectral normalization and b = x_threshold for the tail one
    (anchoring already enforces the lag-0 norm > 1 there).

    The threshold should sit at or above the 99th percentile of ||X_0||;
    fewer than ``min_exceedances`` anchors is an error.
    """
    if normalization not in (TAIL, SPECTRAL):
        raise ValueError(f"unknown normalization {normalization!r}")
    if isinstance(ensemble, SeriesEnsemble):
        q99 = models.norm_quantile(ensemble.spec, 0.99)
        if x_threshold < q99:
            raise ValueError(
                f"x_threshold {x_threshold:.4g} below the 99th percentile "
                f"{q99:.4g} of ||X_0||")
    windows = []
    for _, vals in _iter_value_batches(ensemble):
        B, n, S = vals.shape
        norms = vals.max(axis=2)
        b_idx, t_idx = np.nonzero(norms > x_threshold)
        keep = (t_idx >= m) & (t_idx < n - m)
        b_idx, t_idx = b_idx[keep], t_idx[keep]
        if len(b_idx) == 0:
            continue
        offs = np.arange(-m, m + 1)
        win = vals[b_idx[:, None], t_idx[:, None] + offs[None, :], :]
        if normalization == SPECTRAL:
            win = win / norms[b_idx, t_idx][:, None, None]
        else:
            win = win / x_threshold
        windows.append(win)
    count = sum(w.shape[0] for w in windows)
    if count < min_exceedances:
        raise TooFewExceedancesError(
            f"only {count} exceedances above {x_threshold:.4g} "
            f"(need {min_exceedances}); lower the threshold or simulate more")
    vectors = np.concatenate(windows, axis=0)
    return EmpiricalPathEnsemble(lags=np.arange(-m, m + 1), vectors=vectors,
                                 normalization=normalization,
                                 threshold=x_threshold)


# ---------------------------------------------------------------------------
# cluster law: tail process conditioned on no exceedance at negative lags

@dataclass
class ClusterSample:
    """Tail path conditioned on sup_{j <= -1} ||Y_j|| <= 1, with its
    uniform time label."""

    time_label: float
    lags: np.ndarray
    vectors: np.ndarray       # (L, S)

    def norms(self) -> np.ndarray:
        return self.vectors.max(axis=1)


def cluster_ensemble(spec: ModelSpec, m: int, reps: int, rng,
                     max_tries: Optional[int] = None
                     ) -> Tuple[PathEnsemble, np.ndarray, int]:
    """Accept-reject tail paths on the event sup_{j<=-1} ||Y_j|| <= 1.

    For the max-AR model the backward lags either vanish or exceed 1, so
    the finite-window check is exact for the infinite-lag conditioning
    event. Returns (accepted paths, uniform time labels, total tries);
    the acceptance rate estimates theta.
    """
    rng = seeding.as_generator(rng)
    if max_tries is None:
        max_tries = max(200 * reps, 10_000)
    chunks = []
    labels = []
    accepted = 0
    tries = 0
    while accepted < reps:
        want = reps - accepted
        budget_left = max_tries - tries
        if budget_left <= 0:
            rate = accepted / max(tries, 1)
            raise RejectionBudgetError(
                f"rejection budget {max_tries} exhausted with {accepted} "
                f"accepted (theta estimate {rate:.4g})", theta_estimate=rate)
        # acceptance probability is theta; draw enough to finish in one go
        theta_guess = max(models.analytic_extremal_index(spec), 1e-3)
        draw = int(min(budget_left, max(64, math.ceil(1.3 * want / theta_guess))))
        ens = sample_path_ensemble(spec, m, draw, rng, TAIL)
        ok_idx = np.nonzero(ens.backward_max() <= 1.0)[0]
        if ok_idx.size > want:
            # stop counting tries at the draw that completed the quota
            tries += int(ok_idx[want - 1]) + 1
            ok_idx = ok_idx[:want]
        else:
            tries += draw
        if ok_idx.size:
            chunks.append((ens.values[ok_idx], ens.site[ok_idx]))
            labels.append(rng.random(ok_idx.size))
            accepted += ok_idx.size
    values = np.concatenate([c[0] for c in chunks], axis=0)
    site = np.concatenate([c[1] for c in chunks], axis=0)
    ens = PathEnsemble(lags=np.arange(-m, m + 1), values=values, site=site,
                       normalization=TAIL)
    return ens, np.concatenate(labels), tries


def sample_cluster(spec: ModelSpec, m: int, rng,
                   max_tries: int = 100_000) -> ClusterSample:
    """One cluster sample by rejection; time label uniform on (0, 1)."""
    rng = seeding.as_generator(rng)
    ens, labels, _ = cluster_ensemble(spec, m, 1, rng, max_tries=max_tries)
    path = ens.path(0, spec.n_sites)
    return ClusterSample(time_label=float(labels[0]), lags=path.lags,
                         vectors=path.vectors)


# ---------------------------------------------------------------------------
# extremal index

@dataclass
class ThetaEstimate:
    value: float
    std_error: float
    reps: int
    window: int


def default_window(spec: ModelSpec, tol: float = 1e-6) -> int:
    """Window m with a^(m alpha) < tol; lags past m cannot matter at the
    package's tolerances."""
    return models.lag_window(spec, tol)


def extremal_index_mc(spec: ModelSpec, reps: int = 100_000, rng=None,
                      m: Optional[int] = None) -> ThetaEstimate:
    """Monte Carlo of theta = P(max_{1<=j<=m} ||Y_j|| <= 1) over tail paths,
    with binomial standard error."""
    if m is None:
        m = default_window(spec)
    rng = seeding.as_generator(rng)
    ens = sample_path_ensemble(spec, m, reps, rng, TAIL)
    fwd = ens.forward_values(from_lag=1)
    if fwd.shape[1] == 0:
        hit = np.ones(reps, dtype=bool)
    else:
        hit = fwd.max(axis=1) <= 1.0
    p = float(hit.mean())
    se = math.sqrt(max(p * (1.0 - p), 0.0) / reps)
    return ThetaEstimate(value=p, std_error=se, reps=reps, window=m)


@dataclass
class BlocksThetaEstimate:
    value: float
    std_error: float
    numerator_count: int
    denominator_count: int
    r_n: int
    a_n: float
    reps: int


def _iter_norm_batches(ensemble, batch_size=256):
    if isinstance(ensemble, SeriesEnsemble):
        yield from ensemble.norm_batches(batch_size)
    else:
        series_list = list(ensemble)
        norms = np.stack([s.norms() for s in series_list])
        yield np.arange(len(series_list)), norms


def extremal_index_blocks(ensemble, r_n: int, a_n: float) -> BlocksThetaEstimate:
    """Blocks ratio estimator P(M_{r_n} > a_n) / (r_n P(||X_0|| > a_n)).

    Numerator from disjoint length-r_n blocks of each series, denominator
    from all time steps. Standard error by the delta method over
    per-replication (block-hit, marginal-hit) pairs.
    """
    if r_n < 1:
        raise ValueError("r_n must be >= 1")
    if a_n <= 0:
        raise ValueError("a_n must be > 0")
    num_per = []
    den_per = []
    k_n = None
    n = None
    for _, norms in _iter_norm_batches(ensemble):
        B, n = norms.shape
        k_n = n // r_n
        if k_n < 1:
            raise ValueError("r_n exceeds the series length")
        blocks = norms[:, :k_n * r_n].reshape(B, k_n, r_n)
        num_per.append((blocks.max(axis=2) > a_n).sum(axis=1))
        den_per.append((norms > a_n).sum(axis=1))
    num = np.concatenate(num_per).astype(np.float64)
    den = np.concatenate(den_per).astype(np.float64)
    R = len(num)
    num_total = int(num.sum())
    den_total = int(den.sum())
    if den_total == 0:
        raise ZeroDenominatorError("no marginal exceedances of a_n observed")
    p_block = num.mean() / k_n
    p_marg = den.mean() / n
    theta = p_block / (r_n * p_marg)
    # delta method on the ratio of per-replication means
    mn, md = num.mean(), den.mean()
    cov = np.cov(num, den) / R if R > 1 else np.zeros((2, 2))
    rel_var = (cov[0, 0] / mn ** 2 + cov[1, 1] / md ** 2
               - 2 * cov[0, 1] / (mn * md))
    se = abs(theta) * math.sqrt(max(rel_var, 0.0))
    return BlocksThetaEstimate(value=float(theta), std_error=float(se),
                               numerator_count=num_total,
                               denominator_count=den_total,
                               r_n=r_n, a_n=float(a_n), reps=R)
