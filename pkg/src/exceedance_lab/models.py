"""Stationary spatially indexed series with known joint regular variation.

The library's oracle model is a spatial max-autoregression with Frechet
innovations,

    Z_t(s) = max(lam * V_t, W_t(s)),   V_t, W_t(s) iid standard Frechet(alpha)
    X_t(s) = max(a * X_{t-1}(s), (1 - a) * Z_t(s)),

started from the stationary distribution via burn-in. Its marginal laws,
tail process and extremal index are available in closed form (lam = 0),
which is what makes the numerical verification in the rest of the package
possible:

* the per-site marginal is exactly Frechet with scale
  c^(1/alpha), c = (1-a)^alpha (1 + lam^alpha) / (1 - a^alpha);
* the sup-norm over sites is exactly Frechet with scale sigma,
  sigma^alpha = (1-a)^alpha (lam^alpha + |S|) / (1 - a^alpha);
* the extremal index is theta = 1 - a^alpha;
* for lam = 0 the tail path is one-hot at a uniformly chosen leading site
  with forward decay a^j and a geometric backward-inheritance chain.

The iid Frechet model is the special case a = 0, lam = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from concurrent.futures import ThreadPoolExecutor
from typing import Iterator, Optional, Sequence, Tuple, Union

import numpy as np

from . import seeding
from ._kernels import maxar_series
from .types import SPECTRAL, TAIL, TailPath

IID_FRECHET = "iid-frechet"
SPATIAL_MAX_AR = "spatial-max-ar"


class UnsupportedModelError(Exception):
    """Raised when a closed form is requested for a model that has none."""


def _normalize_sites(sites) -> Tuple[str, ...]:
    if isinstance(sites, int):
        if sites < 1:
            raise ValueError("need at least one site")
        return tuple(f"s{i}" for i in range(sites))
    out = tuple(str(s) for s in sites)
    if len(out) < 1:
        raise ValueError("need at least one site")
    if len(set(out)) != len(out):
        raise ValueError("site labels must be unique")
    return out


@dataclass(frozen=True)
class ModelSpec:
    """Parameters of the series generator.

    Parameters
    ----------
    kind : "iid-frechet" or "spatial-max-ar".
    alpha : tail index, > 0.
    a : temporal max-AR coefficient in [0, 1).
    lam : spatial common-factor weight in [0, 1).
    sites : site labels (or an int site count).
    seed : 64-bit master seed for all simulation from this spec.
    """

    kind: str = SPATIAL_MAX_AR
    alpha: float = 1.0
    a: float = 0.0
    lam: float = 0.0
    sites: Tuple[str, ...] = ("s0",)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "sites", _normalize_sites(self.sites))
        for name in ("alpha", "a", "lam"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v!r}")
        if self.kind not in (IID_FRECHET, SPATIAL_MAX_AR):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if not self.alpha > 0:
            raise ValueError("alpha must be > 0")
        if not 0.0 <= self.a < 1.0:
            raise ValueError("a must be in [0, 1)")
        if not 0.0 <= self.lam < 1.0:
            raise ValueError("lambda must be in [0, 1)")
        if self.kind == IID_FRECHET and (self.a != 0.0 or self.lam != 0.0):
            raise ValueError("iid-frechet requires a = 0 and lambda = 0")

    @property
    def n_sites(self) -> int:
        return len(self.sites)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "alpha": self.alpha, "a": self.a,
                "lam": self.lam, "sites": list(self.sites), "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        return cls(kind=d.get("kind", SPATIAL_MAX_AR), alpha=d["alpha"],
                   a=d.get("a", 0.0), lam=d.get("lam", 0.0),
                   sites=d.get("sites", 1), seed=d.get("seed", 0))


def iid_frechet(alpha: float, sites=1, seed: int = 0) -> ModelSpec:
    return ModelSpec(kind=IID_FRECHET, alpha=alpha, sites=sites, seed=seed)


def spatial_max_ar(alpha: float, a: float, lam: float = 0.0, sites=1,
                   seed: int = 0) -> ModelSpec:
    return ModelSpec(kind=SPATIAL_MAX_AR, alpha=alpha, a=a, lam=lam,
                     sites=sites, seed=seed)


@dataclass
class SpatioTemporalSeries:
    """An n x |S| block of non-negative values, one spatial row per step."""

    values: np.ndarray
    sites: Tuple[str, ...]
    burn_in_discarded: int = 0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError("values must be 2-d (time x sites)")
        if self.values.shape[0] < 1:
            raise ValueError("series must have at least one row")
        if self.values.shape[1] != len(self.sites):
            raise ValueError("column count must match number of sites")
        if np.any(self.values < 0):
            raise ValueError("series values must be non-negative")

    def __len__(self) -> int:
        return self.values.shape[0]

    def norms(self) -> np.ndarray:
        return self.values.max(axis=1)


# ---------------------------------------------------------------------------
# closed-form marginal / tail quantities

def burn_in_length(spec: ModelSpec) -> int:
    """Discarded start-up steps; max-AR memory decays geometrically at rate a."""
    return int(math.ceil(200.0 / (1.0 - spec.a)))


def marginal_tail_constant(spec: ModelSpec) -> float:
    """c with P(X_0(s) > x) ~ c x^(-alpha); the per-site marginal is exactly
    Frechet(alpha) with scale c^(1/alpha)."""
    a, al, lam = spec.a, spec.alpha, spec.lam
    geo = 1.0 if a == 0.0 else (1.0 - a) ** al / (1.0 - a ** al)
    return geo * (1.0 + lam ** al)


def norm_frechet_scale(spec: ModelSpec) -> float:
    """sigma with ||X_0|| exactly Frechet(alpha, sigma).

    The sup-norm over sites follows a scalar max-AR recursion driven by
    max_s Z_t(s), itself iid Frechet with scale (lam^alpha + |S|)^(1/alpha).
    """
    a, al = spec.a, spec.alpha
    geo = 1.0 if a == 0.0 else (1.0 - a) ** al / (1.0 - a ** al)
    return (geo * (spec.lam ** al + spec.n_sites)) ** (1.0 / al)


def norm_cdf(spec: ModelSpec, x) -> np.ndarray:
    """Exact P(||X_0|| <= x)."""
    sig = norm_frechet_scale(spec)
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = np.exp(-((sig / x[pos]) ** spec.alpha))
    return out


def norm_tail_prob(spec: ModelSpec, x: float) -> float:
    """Exact P(||X_0|| > x)."""
    if x <= 0:
        return 1.0
    sig = norm_frechet_scale(spec)
    return float(-np.expm1(-((sig / x) ** spec.alpha)))


def norm_quantile(spec: ModelSpec, q: float) -> float:
    """Exact quantile of ||X_0||, q in (0, 1)."""
    if not 0.0 < q < 1.0:
        raise ValueError("q must be in (0, 1)")
    sig = norm_frechet_scale(spec)
    return sig * (-math.log(q)) ** (-1.0 / spec.alpha)


def analytic_extremal_index(spec: ModelSpec) -> float:
    """theta = P(M at forward lags of the tail process stays <= 1) = 1 - a^alpha."""
    return 1.0 - spec.a ** spec.alpha


def lag_window(spec: ModelSpec, tol: float = 1e-6) -> int:
    """Window m with a^(m alpha) < tol, so lags beyond m are negligible."""
    if spec.a == 0.0:
        return 1
    m = int(math.ceil(math.log(tol) / (spec.alpha * math.log(spec.a)))) + 1
    return max(m, 1)


# ---------------------------------------------------------------------------
# simulation

def _draw_uniforms(spec: ModelSpec, total: int, rng: np.random.Generator):
    u_w = rng.random((total, spec.n_sites))
    u_v = rng.random(total) if spec.lam > 0 else np.empty(1)
    return u_w, u_v


def _simulate_raw(spec: ModelSpec, n: int, replication_id: int) -> np.ndarray:
    burn = burn_in_length(spec)
    rng = seeding.philox_stream(spec.seed, seeding.DOMAIN_SERIES, replication_id)
    u_w, u_v = _draw_uniforms(spec, burn + n, rng)
    x = maxar_series(u_w, u_v, spec.a, spec.lam, 1.0 / spec.alpha)
    return x[burn:]


def simulate_series(spec: ModelSpec, n: int,
                    replication_id: int = 0) -> SpatioTemporalSeries:
    """Simulate one replication of the series.

    Deterministic given (spec.seed, replication_id): replications are keyed
    into independent counter-based streams, so ensembles may be generated
    in any order or in parallel with identical results.

    Parameters
    ----------
    spec : model parameters.
    n : series length, >= 1.
    replication_id : index of the replication within the ensemble.

    Returns
    -------
    SpatioTemporalSeries with n rows (burn-in already discarded).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    values = _simulate_raw(spec, n, replication_id)
    return SpatioTemporalSeries(values=values, sites=spec.sites,
                                burn_in_discarded=burn_in_length(spec))


def _simulate_norm_raw(spec: ModelSpec, n: int, replication_id: int) -> np.ndarray:
    """Scalar series equal in law to ||X_t||; cheaper than the full field.

    ||X_t|| = max(a ||X_{t-1}||, (1-a) max_s Z_t(s)) and max_s Z_t(s) is iid
    Frechet with scale (lam^alpha + |S|)^(1/alpha), so the norm path is a
    scalar max-AR scaled by that factor (positive homogeneity of the
    recursion). Uses its own stream domain.
    """
    burn = burn_in_length(spec)
    rng = seeding.philox_stream(spec.seed, seeding.DOMAIN_NORM_SERIES, replication_id)
    u_w = rng.random((burn + n, 1))
    scale = (spec.lam ** spec.alpha + spec.n_sites) ** (1.0 / spec.alpha)
    x = maxar_series(u_w, np.empty(1), spec.a, 0.0, 1.0 / spec.alpha)
    return scale * x[burn:, 0]


@dataclass(frozen=True)
class SeriesEnsemble:
    """Lazy ensemble of independent replications of a series.

    Batches are generated on demand so large ensembles never materialize at
    once. Replication r always uses stream (spec.seed, r), independent of
    batch size or worker count; rep_offset shifts the replication-id range
    so disjoint sub-ensembles of the same spec stay independent.
    """

    spec: ModelSpec
    n: int
    reps: int
    workers: Optional[int] = None
    rep_offset: int = 0

    def __post_init__(self):
        if self.n < 1 or self.reps < 1:
            raise ValueError("n and reps must be >= 1")

    def _run(self, fill, rep_ids, out):
        w = self.workers or 1
        if w <= 1 or len(rep_ids) < 4:
            for i, r in enumerate(rep_ids):
                out[i] = fill(int(r))
            return
        def job(chunk):
            for i in chunk:
                out[i] = fill(int(rep_ids[i]))
        chunks = np.array_split(np.arange(len(rep_ids)), w)
        with ThreadPoolExecutor(max_workers=w) as ex:
            list(ex.map(job, chunks))

    def batches(self, batch_size: int = 256) -> Iterator[Tuple[np.ndarray, np.ndarray]]:
        """Yield (replication_ids, values) with values of shape (B, n, |S|)."""
        lo, hi = self.rep_offset, self.rep_offset + self.reps
        for start in range(lo, hi, batch_size):
            ids = np.arange(start, min(start + batch_size, hi))
            out = np.empty((len(ids), self.n, self.spec.n_sites))
            self._run(lambda r: _simulate_raw(self.spec, self.n, r), ids, out)
            yield ids, out

    def norm_batches(self, batch_size: int = 256) -> Iterator[Tuple[np.ndarray, np.ndarray]]:
        """Yield (replication_ids, norms) with norms of shape (B, n).

        Uses the scalar norm-process shortcut (equal in law to ||X_t||, not
        pathwise coupled to :meth:`batches`).
        """
        lo, hi = self.rep_offset, self.rep_offset + self.reps
        for start in range(lo, hi, batch_size):
            ids = np.arange(start, min(start + batch_size, hi))
            out = np.empty((len(ids), self.n))
            self._run(lambda r: _simulate_norm_raw(self.spec, self.n, r), ids, out)
            yield ids, out


# ---------------------------------------------------------------------------
# closed-form tail path (lam = 0)

def _require_closed_form(spec: ModelSpec):
    if spec.lam > 0.0:
        raise UnsupportedModelError(
            "no closed-form tail path registered for lambda > 0; "
            "use tailproc.empirical_tail_path as the oracle")


def _analytic_path_batch(spec: ModelSpec, m: int, reps: int,
                         rng: np.random.Generator, normalization: str = TAIL):
    """Vectorized sampler of the closed-form tail path law.

    Returns (values, site) where values[r, k] is the norm of the path of
    replication r at lag lags[k] = k - m, and site[r] is the leading site.
    The path vector at a lag is values * e_site (one-hot): for lam = 0 the
    sites are asymptotically independent, so an extreme lives on a single
    uniformly distributed site.
    """
    _require_closed_form(spec)
    if m < 0:
        raise ValueError("window m must be >= 0")
    a, al = spec.a, spec.alpha
    site = rng.integers(0, spec.n_sites, size=reps)
    if normalization == TAIL:
        radial = (1.0 - rng.random(reps)) ** (-1.0 / al)  # alpha-Pareto, >= 1
    elif normalization == SPECTRAL:
        radial = np.ones(reps)
    else:
        raise ValueError(f"unknown normalization {normalization!r}")
    L = 2 * m + 1
    values = np.zeros((reps, L))
    j_fwd = np.arange(0, m + 1)
    values[:, m:] = radial[:, None] * a ** j_fwd[None, :]
    if m > 0 and a > 0.0:
        # backward: inherited from the past for a geometric number of lags
        u = rng.random(reps)
        with np.errstate(divide="ignore"):
            k_back = np.floor(np.log(1.0 - u) / (al * math.log(a))).astype(np.int64)
        k_back = np.minimum(k_back, m)
        j_bwd = np.arange(1, m + 1)
        inherit = j_bwd[None, :] <= k_back[:, None]
        values[:, :m] = np.where(
            inherit[:, ::-1], radial[:, None] * a ** (-j_bwd[::-1])[None, :], 0.0)
    return values, site


def analytic_tail_path(spec: ModelSpec, window: int,
                       rng: Union[np.random.Generator, int, None]) -> TailPath:
    """One closed-form sample of the tail path {Y_j, -window <= j <= window}.

    Only available for lam = 0. Lag 0 is alpha-Pareto at a uniformly chosen
    leading site; forward lags decay deterministically by a per step;
    backward lags equal a^(-j) Y_0 while the extreme is inherited from the
    past (probability a^alpha per step) and are zero from the first
    non-inherited lag on.

    Raises
    ------
    UnsupportedModelError
        If lam > 0 (no closed form registered; the empirical estimator is
        the oracle there).
    """
    rng = seeding.as_generator(rng)
    values, site = _analytic_path_batch(spec, window, 1, rng, TAIL)
    vectors = np.zeros((2 * window + 1, spec.n_sites))
    vectors[:, site[0]] = values[0]
    lags = np.arange(-window, window + 1)
    return TailPath(lags=lags, vectors=vectors, normalization=TAIL)
