"""Laplace functionals of the finite-n and limit exceedance processes.

Five estimation routes share one separable test-function family
g(t, s, x) = w(t) c_s h(||x||), h vanishing on [0, eps]:

* empirical-finite-n   MC over series replications of the finite-n pattern
* limit-tail           tail-process form of the limit Laplace functional
                       (outer time integral by Gauss-Legendre quadrature,
                       inner expectation by path MC)
* limit-spectral       spectral form, radial coordinate sampled from the
                       alpha-Pareto density on (1, inf) (the (0, 1] part of
                       the radial integral vanishes under the risk bound)
* superposition        MC over compound-Poisson cluster superpositions
* block-conditional    both sides of the conditional block limit at a fixed
                       time and scale v

The tail/limit routes evaluate the two lag sums (from lag 1 and from lag 0)
on identical sampled paths: the integrand is a small difference of
near-one exponentials and pairing them is what keeps the variance usable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from . import models, pointproc, risk as riskmod, seeding, tailproc
from .models import ModelSpec
from .tailproc import PathEnsemble, TooFewExceedancesError
from .types import SPECTRAL, TAIL

EMPIRICAL_FINITE_N = "empirical-finite-n"
LIMIT_TAIL = "limit-tail"
LIMIT_SPECTRAL = "limit-spectral"
SUPERPOSITION = "superposition"
BLOCK_CONDITIONAL = "block-conditional"

FLAT = "flat"
BUMP = "bump"
INDICATOR = "indicator"
RAMP = "ramp"
SMOOTHSTEP = "smoothstep"


@dataclass(frozen=True)
class TestFunction:
    """Separable test function g(t, s, x) = w(t) c_s h(||x||).

    h vanishes on [0, eps], so g has support bounded away from the origin;
    w is a smooth time profile on [0, 1]; site weights default to 1.
    """

    name: str = "flat-indicator"
    w_kind: str = FLAT
    h_kind: str = INDICATOR
    beta: float = math.log(2.0)
    eps: float = 0.5
    width: float = 0.5
    site_weights: Optional[Sequence[float]] = None

    def __post_init__(self):
        if self.w_kind not in (FLAT, BUMP):
            raise ValueError(f"unknown time profile {self.w_kind!r}")
        if self.h_kind not in (INDICATOR, RAMP, SMOOTHSTEP):
            raise ValueError(f"unknown value profile {self.h_kind!r}")
        if self.eps <= 0:
            raise ValueError("eps must be > 0 (support bounded away from 0)")
        if self.beta < 0 or self.width <= 0:
            raise ValueError("beta must be >= 0 and width > 0")

    def w(self, t):
        t = np.asarray(t, dtype=np.float64)
        if self.w_kind == FLAT:
            return np.ones_like(t)
        return 4.0 * t * (1.0 - t)

    def h(self, r):
        r = np.asarray(r, dtype=np.float64)
        if self.h_kind == INDICATOR:
            return self.beta * (r > self.eps)
        if self.h_kind == RAMP:
            return self.beta * np.minimum(np.maximum(r - self.eps, 0.0), 1.0)
        x = np.clip((r - self.eps) / self.width, 0.0, 1.0)
        return self.beta * x * x * (3.0 - 2.0 * x)

    def weights(self, n_sites: int) -> np.ndarray:
        if self.site_weights is None:
            return np.ones(n_sites)
        c = np.asarray(self.site_weights, dtype=np.float64)
        if c.shape != (n_sites,):
            raise ValueError("site_weights length must match the site count")
        if np.any(c < 0):
            raise ValueError("site weights must be >= 0")
        return c

    def g(self, t: float, s: int, x) -> float:
        """Pointwise g(t, s, x) with x a spatial vector."""
        x = np.asarray(x, dtype=np.float64)
        c = 1.0 if self.site_weights is None else float(self.site_weights[s])
        return float(self.w(t) * c * self.h(x.max()))


def thresholded_g(g: TestFunction, risk: riskmod.RiskFunctionalSpec,
                  u: float, t: float, s: int, x) -> float:
    """g(t, s, x) 1{r^(s)(x) > u}; the strict inequality matters at the
    boundary r^(s)(x) = u."""
    if riskmod.eval_risk(risk, s, np.asarray(x, dtype=np.float64)) > u:
        return g.g(t, s, x)
    return 0.0


_REGISTRY = {
    "flat-step": dict(w_kind=FLAT, h_kind=SMOOTHSTEP, beta=math.log(2.0),
                      eps=0.5, width=0.5),
    "bump-step": dict(w_kind=BUMP, h_kind=SMOOTHSTEP, beta=1.0,
                      eps=0.5, width=0.5),
    "flat-ramp": dict(w_kind=FLAT, h_kind=RAMP, beta=0.75, eps=0.75),
    "bump-ramp": dict(w_kind=BUMP, h_kind=RAMP, beta=0.5, eps=0.5),
    "flat-indicator": dict(w_kind=FLAT, h_kind=INDICATOR, beta=math.log(2.0),
                           eps=0.5),
}


def test_function(name: str, **overrides) -> TestFunction:
    """Named test function from the standard library of five."""
    if name not in _REGISTRY:
        raise KeyError(f"unknown test function {name!r}; "
                       f"known: {sorted(_REGISTRY)}")
    kw = dict(_REGISTRY[name])
    kw.update(overrides)
    return TestFunction(name=name, **kw)


def standard_test_functions() -> list:
    return [test_function(name) for name in _REGISTRY]


@dataclass
class LaplaceEstimate:
    """A Laplace-functional value in (0, 1] with its Monte Carlo error."""

    value: float
    std_error: float
    reps: int
    provenance: str
    meta: dict = field(default_factory=dict)

    def to_json_obj(self, cfg_hash: str = "") -> dict:
        return {"provenance": self.provenance, "value": self.value,
                "se": self.std_error, "reps": self.reps,
                "config_hash": cfg_hash, **{k: v for k, v in self.meta.items()}}


def combined_se(*estimates) -> float:
    return math.hypot(*[e.std_error for e in estimates])


def _quad_nodes(quad_points: int):
    x, w = np.polynomial.legendre.leggauss(quad_points)
    return (x + 1.0) / 2.0, w / 2.0


# ---------------------------------------------------------------------------
# shared one-hot path machinery

def _forward_term_sums(ens: PathEnsemble, rmat: np.ndarray, tf: TestFunction,
                       u: float, scale, c: np.ndarray,
                       batch: int = 1 << 15):
    """Per-path forward sums A0 (lags >= 0) and A1 (lags >= 1) of
    c_s h(scale ||Y_j||) 1{scale r^(s)(Y_j) > u}.

    scale is a scalar or a per-path vector (spectral radial coordinate).
    """
    R = len(ens)
    m = ens.window
    fwd = ens.forward_values(0)                  # (R, m+1), lag 0 first
    A0 = np.empty(R)
    A1 = np.empty(R)
    scale_vec = np.broadcast_to(np.asarray(scale, dtype=np.float64), (R,))
    for lo in range(0, R, batch):
        hi = min(lo + batch, R)
        v = fwd[lo:hi] * scale_vec[lo:hi, None]              # (B, m+1)
        hv = tf.h(v)
        rm = rmat[:, ens.site[lo:hi]].T                      # (B, S)
        weight = ((v[:, :, None] * rm[:, None, :]) > u) @ c  # (B, m+1)
        terms = hv * weight
        A0[lo:hi] = terms.sum(axis=1)
        A1[lo:hi] = terms[:, 1:].sum(axis=1)
    return A0, A1


def _bracket_quadrature(A0, A1, tf: TestFunction, quad_points: int):
    """J[r] = integral over t of exp(-w(t) A1[r]) - exp(-w(t) A0[r]) dt,
    evaluated by Gauss-Legendre; returns the per-path integrals."""
    nodes, wts = _quad_nodes(quad_points)
    wt_nodes = tf.w(nodes)                                    # (Q,)
    # (R, Q) outer products; paths paired across the two sums
    e1 = np.exp(-np.outer(A1, wt_nodes))
    e0 = np.exp(-np.outer(A0, wt_nodes))
    return (e1 - e0) @ wts


# ---------------------------------------------------------------------------
# estimators

def empirical_laplace(spec: ModelSpec, g: TestFunction,
                      risk: riskmod.RiskFunctionalSpec, u: float, n: int,
                      reps: int, rng=None, a_n: Optional[float] = None,
                      rep_offset: int = 0, workers: Optional[int] = None,
                      batch_size: int = 256) -> LaplaceEstimate:
    """Finite-n Laplace functional by MC over series replications.

    Each replication contributes exp(-sum_{s,j} <g>_u(j/n, s, X_j / a_n)).
    Only steps with ||X_j|| > a_n eps can contribute (support of h), so the
    sum is evaluated sparsely on the exceedance set.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    if a_n is None:
        a_n = pointproc.compute_a_n(spec, n)
    c = g.weights(spec.n_sites)
    ens = models.SeriesEnsemble(spec, n, reps, workers=workers,
                                rep_offset=rep_offset)
    sums = np.zeros(reps)
    screen = a_n * g.eps
    # cap batch memory at ~20M values per batch
    batch_size = max(1, min(batch_size, (2 * 10 ** 7) // (n * spec.n_sites)))
    for ids, vals in ens.batches(batch_size):
        ids = ids - rep_offset
        norms = vals.max(axis=2)
        b_idx, t_idx = np.nonzero(norms > screen)
        if len(b_idx) == 0:
            continue
        x = vals[b_idx, t_idx] / a_n                         # (K, S)
        hv = g.h(norms[b_idx, t_idx] / a_n)
        w = g.w((t_idx + 1.0) / n)
        weight = (riskmod.site_risks(risk, x) > u) @ c
        np.add.at(sums, ids[b_idx], w * hv * weight)
    vals_exp = np.exp(-sums)
    value = float(vals_exp.mean())
    se = float(vals_exp.std(ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0
    return LaplaceEstimate(value=value, std_error=se, reps=reps,
                           provenance=EMPIRICAL_FINITE_N,
                           meta={"n": n, "a_n": a_n, "u": u, "g": g.name})


def limit_laplace_tail(spec: ModelSpec, g: TestFunction,
                       risk: riskmod.RiskFunctionalSpec, u: float,
                       reps: int, rng=None, m: Optional[int] = None,
                       quad_points: int = 64) -> LaplaceEstimate:
    """Tail-process form of the limit Laplace functional.

    exp(-int_0^1 E[exp(-sum_{j>=1} <g>_u(t, s, Y_j))
                   - exp(-sum_{j>=0} <g>_u(t, s, Y_j))] dt),
    time integral by quadrature, expectation by tail-path MC.
    """
    rng = seeding.as_generator(rng)
    if m is None:
        m = tailproc.default_window(spec)
    rmat = riskmod.unit_vector_risks(risk, spec.n_sites)
    c = g.weights(spec.n_sites)
    ens = tailproc.sample_path_ensemble(spec, m, reps, rng, TAIL)
    A0, A1 = _forward_term_sums(ens, rmat, g, u, 1.0, c)
    J_r = _bracket_quadrature(A0, A1, g, quad_points)
    J = float(J_r.mean())
    se_J = float(J_r.std(ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0
    value = math.exp(-J)
    return LaplaceEstimate(value=value, std_error=value * se_J, reps=reps,
                           provenance=LIMIT_TAIL,
                           meta={"m": m, "u": u, "g": g.name,
                                 "quad_points": quad_points})


def limit_laplace_spectral(spec: ModelSpec, g: TestFunction,
                           risk: riskmod.RiskFunctionalSpec, u: float,
                           reps: int, rng=None, m: Optional[int] = None,
                           quad_points: int = 64,
                           v_strategy: str = "pareto") -> LaplaceEstimate:
    """Spectral form: paths normalized to ||Theta_0|| = 1 and an independent
    radial coordinate with density alpha v^(-alpha-1) on (1, inf).

    Restricting the radial integral to (1, inf) is exact: for v <= 1 the
    risk bound kills the lag-0 term and the bracket vanishes. ``v_strategy``
    "pareto" draws v iid; "stratified" stratifies the uniform underlying the
    inverse CDF (variance reduction, same law).
    """
    rng = seeding.as_generator(rng)
    if m is None:
        m = tailproc.default_window(spec)
    rmat = riskmod.unit_vector_risks(risk, spec.n_sites)
    c = g.weights(spec.n_sites)
    ens = tailproc.sample_path_ensemble(spec, m, reps, rng, SPECTRAL)
    if v_strategy == "pareto":
        uu = rng.random(reps)
    elif v_strategy == "stratified":
        uu = (rng.permutation(reps) + rng.random(reps)) / reps
    else:
        raise ValueError(f"unknown v_strategy {v_strategy!r}")
    v = (1.0 - uu) ** (-1.0 / spec.alpha)
    A0, A1 = _forward_term_sums(ens, rmat, g, u, v, c)
    J_r = _bracket_quadrature(A0, A1, g, quad_points)
    J = float(J_r.mean())
    se_J = float(J_r.std(ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0
    value = math.exp(-J)
    return LaplaceEstimate(value=value, std_error=value * se_J, reps=reps,
                           provenance=LIMIT_SPECTRAL,
                           meta={"m": m, "u": u, "g": g.name,
                                 "v_strategy": v_strategy})


def superposition_laplace(spec: ModelSpec, g: TestFunction,
                          risk: riskmod.RiskFunctionalSpec, u: float,
                          reps: int, rng=None, m: Optional[int] = None,
                          theta="analytic") -> LaplaceEstimate:
    """MC over compound-Poisson superposition draws of
    exp(-sum over retained points of g)."""
    from . import limit as limitmod
    rng = seeding.as_generator(rng)
    if m is None:
        m = tailproc.default_window(spec)
    T, sample_idx, times, ens = limitmod.superposition_batch(
        spec, reps, rng, m=m, theta=theta)
    sums = np.zeros(reps)
    if len(ens):
        rmat = riskmod.unit_vector_risks(risk, spec.n_sites)
        c = g.weights(spec.n_sites)
        A0, _ = _forward_term_sums(ens, rmat, g, u, 1.0, c)
        np.add.at(sums, sample_idx, g.w(times) * A0)
    vals = np.exp(-sums)
    value = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0
    return LaplaceEstimate(value=value, std_error=se, reps=reps,
                           provenance=SUPERPOSITION,
                           meta={"m": m, "u": u, "g": g.name})


# ---------------------------------------------------------------------------
# Lemma-style conditional block check

@dataclass
class BlockConditionalResult:
    """Both sides of the conditional block identity at fixed (t, v)."""

    left: LaplaceEstimate
    right: LaplaceEstimate
    difference: float
    combined_se: float
    accepted_blocks: int
    total_blocks: int


def block_conditional_laplace(spec: ModelSpec, g: TestFunction,
                              risk: riskmod.RiskFunctionalSpec, u: float,
                              v_scale: float, t: float, n: int, r_n: int,
                              reps: int, rng=None,
                              m: Optional[int] = None,
                              min_accepted: int = 50,
                              batch_size: int = 512) -> BlockConditionalResult:
    """Conditional block Laplace limit, both sides.

    Left: E[exp(-sum_{s,j<=r_n} <g>_u(t, s, v X_j / a_n)) | M_{r_n} > a_n]
    over ``reps`` freshly simulated stationary blocks of length r_n, with
    a_n taken at the full series length n.
    Right: 1 - theta^{-1} E[exp(-sum_{j>=1} <g>_u(t, s, v Y_j))
                             - exp(-sum_{j>=0} ...)] over tail paths.
    """
    if not 0.0 < v_scale <= 1.0:
        raise ValueError("v_scale must be in (0, 1]")
    rng = seeding.as_generator(rng)
    if m is None:
        m = tailproc.default_window(spec)
    a_n = pointproc.compute_a_n(spec, n)
    c = g.weights(spec.n_sites)
    w_t = float(g.w(t))

    # left side: conditional MC over blocks
    ens = models.SeriesEnsemble(spec, r_n, reps)
    screen = a_n * g.eps / v_scale
    vals_accepted = []
    for _, vals in ens.batches(batch_size):
        norms = vals.max(axis=2)
        cond = norms.max(axis=1) > a_n
        if not cond.any():
            continue
        vals = vals[cond]
        norms = norms[cond]
        sums = np.zeros(len(vals))
        b_idx, t_idx = np.nonzero(norms > screen)
        if len(b_idx):
            x = vals[b_idx, t_idx] * (v_scale / a_n)
            hv = g.h(norms[b_idx, t_idx] * (v_scale / a_n))
            weight = (riskmod.site_risks(risk, x) > u) @ c
            np.add.at(sums, b_idx, hv * weight)
        vals_accepted.append(np.exp(-w_t * sums))
    accepted = sum(len(v) for v in vals_accepted)
    if accepted < min_accepted:
        raise TooFewExceedancesError(
            f"only {accepted} blocks with M_r > a_n out of {reps}")
    lvals = np.concatenate(vals_accepted)
    left = LaplaceEstimate(
        value=float(lvals.mean()),
        std_error=float(lvals.std(ddof=1) / math.sqrt(accepted)),
        reps=accepted, provenance=BLOCK_CONDITIONAL,
        meta={"side": "conditional-blocks", "n": n, "r_n": r_n, "t": t,
              "v": v_scale, "a_n": a_n})

    # right side: tail-path MC of the theta^{-1} bracket
    theta = models.analytic_extremal_index(spec)
    rmat = riskmod.unit_vector_risks(risk, spec.n_sites)
    path_reps = max(reps // 2, 10_000)
    pens = tailproc.sample_path_ensemble(spec, m, path_reps, rng, TAIL)
    A0, A1 = _forward_term_sums(pens, rmat, g, u, v_scale, c)
    D = np.exp(-w_t * A1) - np.exp(-w_t * A0)
    rvalue = 1.0 - float(D.mean()) / theta
    rse = float(D.std(ddof=1) / math.sqrt(path_reps)) / theta
    right = LaplaceEstimate(value=rvalue, std_error=rse, reps=path_reps,
                            provenance=BLOCK_CONDITIONAL,
                            meta={"side": "tail-path", "t": t, "v": v_scale,
                                  "theta": theta, "m": m})
    return BlockConditionalResult(
        left=left, right=right, difference=left.value - right.value,
        combined_se=combined_se(left, right),
        accepted_blocks=accepted, total_blocks=reps)
