"""Site-dependent risk and mark functionals.

A risk functional r^(s) maps a spatial vector to a non-negative scalar and
must be positively homogeneous (r^(s)(c x) = c r^(s)(x), c > 0) and
continuous at the origin; exceedances are events r^(s)(X_t) > threshold.
Built-in kinds:

* ``sup-norm``      r^(s)(x) = max_s' x(s')   (same at every site; an extreme
                    step contributes all |S| sites)
* ``coordinate``    r^(s)(x) = x(s)           (at least one site per extreme)
* ``argmax``        r^(s)(x) = x(s) 1{x(s) >= x(s') for all s'}  (exactly one
                    site per extreme, almost surely)
* ``user-table``    a caller-supplied callable, probed for homogeneity at
                    construction time.

Marks attach a non-negative feature to each point; ``affected-fraction`` is
the fraction of sites s~ with r^(s~)(x) > u.

The norm used throughout the package is the supremum norm, so the sup-norm
risk coincides with the norm entering regular variation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import seeding

SUP_NORM = "sup-norm"
COORDINATE = "coordinate"
ARGMAX = "argmax"
USER_TABLE = "user-table"

SAME_AS_RISK = "same-as-risk"
AFFECTED_FRACTION = "affected-fraction"

_RISK_KINDS = (SUP_NORM, COORDINATE, ARGMAX, USER_TABLE)
_MARK_KINDS = (SAME_AS_RISK, AFFECTED_FRACTION, USER_TABLE)

_HOMOGENEITY_TOL = 1e-9  # relative, checked by random probing at load time


@dataclass(frozen=True)
class RiskFunctionalSpec:
    """Declarative description of a family {r^(s)}."""

    kind: str = SUP_NORM
    # user-table: callable (site_index, x) -> float, vectorized over the
    # leading axes of x or plain scalar; probed for homogeneity at load.
    table: Optional[Callable] = None

    def __post_init__(self):
        if self.kind not in _RISK_KINDS:
            raise ValueError(f"unknown risk kind {self.kind!r}")
        if self.kind == USER_TABLE:
            if self.table is None:
                raise ValueError("user-table risk requires a callable")
            _probe_homogeneity(self)


def sup_norm_risk() -> RiskFunctionalSpec:
    return RiskFunctionalSpec(kind=SUP_NORM)


def coordinate_risk() -> RiskFunctionalSpec:
    return RiskFunctionalSpec(kind=COORDINATE)


def argmax_risk() -> RiskFunctionalSpec:
    return RiskFunctionalSpec(kind=ARGMAX)


def user_table_risk(fn: Callable) -> RiskFunctionalSpec:
    return RiskFunctionalSpec(kind=USER_TABLE, table=fn)


def _user_eval(spec: RiskFunctionalSpec, s: int, x: np.ndarray) -> np.ndarray:
    out = spec.table(s, np.asarray(x, dtype=np.float64))
    return np.asarray(out, dtype=np.float64)


def site_risks(spec: RiskFunctionalSpec, x) -> np.ndarray:
    """Evaluate r^(s)(x) for every site.

    x may be (S,) or (..., S); returns the matching (..., S) array.
    """
    x = np.asarray(x, dtype=np.float64)
    if spec.kind == SUP_NORM:
        m = x.max(axis=-1, keepdims=True)
        return np.broadcast_to(m, x.shape).copy()
    if spec.kind == COORDINATE:
        return x.copy()
    if spec.kind == ARGMAX:
        m = x.max(axis=-1, keepdims=True)
        return np.where(x >= m, x, 0.0)
    out = np.empty_like(x)
    for s in range(x.shape[-1]):
        out[..., s] = _user_eval(spec, s, x)
    return out


def eval_risk(spec: RiskFunctionalSpec, s: int, x) -> float:
    """r^(s)(x) for one site index and one spatial vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("x must be a single spatial vector")
    if not 0 <= s < x.shape[0]:
        raise KeyError(f"unknown site index {s}")
    return float(site_risks(spec, x)[s])


def unit_vector_risks(spec: RiskFunctionalSpec, n_sites: int) -> np.ndarray:
    """Matrix R[s, s*] = r^(s)(e_{s*}).

    By positive homogeneity, r^(s)(v e_{s*}) = v R[s, s*]; this is how the
    one-hot closed-form tail paths are pushed through arbitrary risk
    functionals exactly.
    """
    eye = np.eye(n_sites)
    return site_risks(spec, eye).T  # entry [s, s*] = r^(s)(e_{s*})


@dataclass
class RiskBoundCertificate:
    """Random-probe certificate for r^(s)(x) <= u ||x||.

    u_min is the largest probed ratio r^(s)(x) / ||x||, i.e. the smallest
    threshold satisfying the bound on the probe set; ``satisfied`` says
    whether the candidate u passed. On failure, ``witness`` holds the worst
    probe direction.
    """

    u_candidate: float
    u_min: float
    probe_count: int
    satisfied: bool
    worst_ratio: float
    witness: Optional[np.ndarray] = None


def certify_risk_bound(spec: RiskFunctionalSpec, u_candidate: float,
                       probes: int, rng, n_sites: int = 1) -> RiskBoundCertificate:
    """Probe random directions for the bound r^(s)(x) <= u ||x||.

    Directions are sampled on the non-negative part of the unit sup-norm
    sphere; by homogeneity this covers all scales.
    """
    if u_candidate <= 0:
        raise ValueError("u_candidate must be > 0")
    rng = seeding.as_generator(rng)
    x = rng.random((probes, n_sites))
    x /= x.max(axis=1, keepdims=True)  # sup-norm 1
    ratios = site_risks(spec, x)  # (probes, S); ||x|| = 1
    worst_flat = int(np.argmax(ratios))
    worst = float(ratios.flat[worst_flat])
    witness = x[worst_flat // n_sites]
    ok = worst <= u_candidate
    return RiskBoundCertificate(
        u_candidate=float(u_candidate), u_min=worst, probe_count=probes,
        satisfied=ok, worst_ratio=worst / u_candidate,
        witness=None if ok else witness)


@dataclass(frozen=True)
class MarkFunctionalSpec:
    """Declarative description of mark functionals l^(s)."""

    kind: str = AFFECTED_FRACTION
    table: Optional[Callable] = None

    def __post_init__(self):
        if self.kind not in _MARK_KINDS:
            raise ValueError(f"unknown mark kind {self.kind!r}")
        if self.kind == USER_TABLE and self.table is None:
            raise ValueError("user-table mark requires a callable")


def site_marks(mspec: MarkFunctionalSpec, risk: RiskFunctionalSpec,
               u: float, x) -> np.ndarray:
    """Evaluate l^(s)(x) for every site; x is (S,) or (..., S)."""
    x = np.asarray(x, dtype=np.float64)
    if mspec.kind == SAME_AS_RISK:
        return site_risks(risk, x)
    if mspec.kind == AFFECTED_FRACTION:
        frac = (site_risks(risk, x) > u).mean(axis=-1, keepdims=True)
        return np.broadcast_to(frac, x.shape).copy()
    out = np.empty_like(x)
    for s in range(x.shape[-1]):
        out[..., s] = np.asarray(mspec.table(s, x), dtype=np.float64)
    return out


def eval_mark(mspec: MarkFunctionalSpec, risk: RiskFunctionalSpec, u: float,
              s: int, x) -> float:
    """l^(s)(x) for one site and one vector. u is the exceedance level used
    by the affected-fraction mark."""
    if u <= 0:
        raise ValueError("u must be > 0")
    x = np.asarray(x, dtype=np.float64)
    return float(site_marks(mspec, risk, u, x)[s])


def _probe_homogeneity(spec: RiskFunctionalSpec, n_sites: int = 4,
                       probes: int = 64):
    rng = np.random.default_rng(0xC0FFEE)
    x = rng.random((probes, n_sites)) + 1e-3
    c = 10.0 ** rng.uniform(-3, 3, size=probes)
    for s in range(n_sites):
        r1 = _user_eval(spec, s, c[:, None] * x)
        r0 = _user_eval(spec, s, x)
        scale = np.maximum(c * x.max(axis=1), 1e-300)
        if np.any(np.abs(r1 - c * r0) > _HOMOGENEITY_TOL * scale):
            bad = int(np.argmax(np.abs(r1 - c * r0) / scale))
            raise ValueError(
                "user-table risk functional is not positively homogeneous "
                f"(site {s}, witness x={x[bad]}, c={c[bad]:.4g})")
