"""Finite-n exceedance point patterns and the normalizing sequence a_n.

The pattern built from a length-n series at threshold u collects one point
(j/n, s, X_j / a_n [, mark]) for every pair (j, s) with
r^(s)(X_j) > a_n u, where a_n solves n P(||X_0|| > a_n) -> 1.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from . import io, models, risk as riskmod
from .models import ModelSpec, SpatioTemporalSeries
from . import seeding

ANALYTIC = "analytic"
EMPIRICAL = "empirical"

DEFAULT_PRESAMPLES = 10 ** 6


class RootFindingError(Exception):
    pass


def compute_a_n(spec: ModelSpec, n: int, method: str = ANALYTIC,
                presamples: int = DEFAULT_PRESAMPLES) -> float:
    """Scaling value a_n with n P(||X_0|| > a_n) = 1 (exactly, per method).

    ``analytic`` inverts the model's known marginal norm tail: closed form
    for the iid Frechet model, numeric root (Brent) for the max-AR model.
    ``empirical`` returns the (1 - 1/n) quantile of ||X_0|| from a large
    pre-simulation (deterministic given spec.seed).

    n = 1 is degenerate (P(||X_0|| > a) = 1 has no positive root); the
    lower bracket is returned with a warning. n < 10 warns that the
    asymptotics are meaningless.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if n == 1:
        warnings.warn("a_1 is degenerate; returning the lower bracket value")
        return float(np.finfo(float).eps)
    if n < 10:
        warnings.warn(f"n = {n} is far below the asymptotic regime")
    if method == ANALYTIC:
        if spec.kind == models.IID_FRECHET:
            sig = models.norm_frechet_scale(spec)
            return sig * (-math.log1p(-1.0 / n)) ** (-1.0 / spec.alpha)
        target = 1.0 / n
        f = lambda x: models.norm_tail_prob(spec, x) - target
        lo = np.finfo(float).eps
        hi = models.norm_frechet_scale(spec) + 1.0
        for _ in range(200):
            if f(hi) < 0:
                break
            hi *= 2.0
        else:
            raise RootFindingError("could not bracket a_n")
        try:
            return float(brentq(f, lo, hi, xtol=1e-12, rtol=8.9e-16))
        except (ValueError, RuntimeError) as e:
            raise RootFindingError(f"a_n root finding failed: {e}") from e
    if method == EMPIRICAL:
        rng_index = 0xA7  # fixed sub-stream: quantile presampling
        norms = models._simulate_norm_raw(spec, presamples, rng_index)
        return float(np.quantile(norms, 1.0 - 1.0 / n))
    raise ValueError(f"unknown scaling method {method!r}")


@dataclass
class ScalingSequence:
    """a_n values over a grid of n, tagged with the method that made them."""

    method: str
    values: Dict[int, float]

    def __getitem__(self, n: int) -> float:
        return self.values[n]


def compute_scaling_sequence(spec: ModelSpec, ns: Sequence[int],
                             method: str = ANALYTIC,
                             presamples: int = DEFAULT_PRESAMPLES) -> ScalingSequence:
    vals = {int(n): compute_a_n(spec, int(n), method, presamples) for n in ns}
    if any(v <= 0 for v in vals.values()):
        raise ValueError("scaling values must be positive")
    return ScalingSequence(method=method, values=vals)


@dataclass
class PointPattern:
    """Finite multiset of exceedance points.

    times are j/n for finite-n patterns (n set) or uniform cluster times
    for limit patterns (n None, cluster_ids set). values holds the rescaled
    spatial vector of each point; marks is optional.
    """

    times: np.ndarray
    site_idx: np.ndarray
    values: np.ndarray
    u: float
    sites: Sequence[str]
    n: Optional[int] = None
    marks: Optional[np.ndarray] = None
    cluster_ids: Optional[np.ndarray] = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64)
        self.site_idx = np.asarray(self.site_idx, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.marks is not None:
            self.marks = np.asarray(self.marks, dtype=np.float64)
        if self.cluster_ids is not None:
            self.cluster_ids = np.asarray(self.cluster_ids, dtype=np.int64)
        k = len(self.times)
        if self.site_idx.shape != (k,) or self.values.shape[:1] != (k,):
            raise ValueError("inconsistent point arrays")

    def __len__(self) -> int:
        return len(self.times)

    def csv_columns(self):
        cols = ["t", "site"] + [f"x_{s}" for s in self.sites]
        if self.marks is not None:
            cols.append("mark")
        if self.cluster_ids is not None:
            cols.append("cluster")
        return cols

    def csv_rows(self):
        for i in range(len(self)):
            row = [repr(float(self.times[i])), self.sites[int(self.site_idx[i])]]
            row += [repr(float(v)) for v in self.values[i]]
            if self.marks is not None:
                row.append(repr(float(self.marks[i])))
            if self.cluster_ids is not None:
                row.append(int(self.cluster_ids[i]))
            yield row

    def to_json_obj(self) -> dict:
        obj = {
            "schema": "exceedance-lab pattern v1",
            "u": float(self.u),
            "n": None if self.n is None else int(self.n),
            "sites": list(self.sites),
            "times": [float(t) for t in self.times],
            "site_idx": [int(s) for s in self.site_idx],
            "values": [[float(v) for v in row] for row in self.values],
            "marks": None if self.marks is None else [float(m) for m in self.marks],
            "cluster_ids": (None if self.cluster_ids is None
                            else [int(c) for c in self.cluster_ids]),
        }
        return obj

    @classmethod
    def from_json_obj(cls, obj: dict) -> "PointPattern":
        k = len(obj["times"])
        values = np.array(obj["values"], dtype=np.float64).reshape(k, len(obj["sites"]))
        return cls(
            times=np.array(obj["times"], dtype=np.float64),
            site_idx=np.array(obj["site_idx"], dtype=np.int64),
            values=values,
            u=obj["u"],
            sites=tuple(obj["sites"]),
            n=obj["n"],
            marks=None if obj["marks"] is None else np.array(obj["marks"]),
            cluster_ids=(None if obj["cluster_ids"] is None
                         else np.array(obj["cluster_ids"], dtype=np.int64)),
        )

    def write_csv(self, path, config_hash=None):
        return io.write_csv(path, self.csv_columns(), self.csv_rows(),
                            config_hash=config_hash)

    def write_json(self, path, config_hash=None):
        obj = self.to_json_obj()
        if config_hash:
            obj["config_hash"] = config_hash
        return io.write_json(path, obj)


def build_exceedance_pattern(series: SpatioTemporalSeries,
                             risk: riskmod.RiskFunctionalSpec, u: float,
                             a_n: float,
                             mark: Optional[riskmod.MarkFunctionalSpec] = None
                             ) -> PointPattern:
    """Collect the exceedance points of one series.

    Emits (j/n, s, X_j / a_n [, l^(s)(X_j / a_n)]) exactly for the pairs
    (j, s) with r^(s)(X_j) > a_n u. An empty pattern is valid output.
    """
    if a_n <= 0:
        raise ValueError("a_n must be > 0")
    n = len(series)
    risks = riskmod.site_risks(risk, series.values)
    j_idx, s_idx = np.nonzero(risks > a_n * u)
    rescaled = series.values[j_idx] / a_n
    marks = None
    if mark is not None:
        marks = riskmod.site_marks(mark, risk, u, rescaled)[
            np.arange(len(j_idx)), s_idx]
    return PointPattern(
        times=(j_idx + 1) / n,
        site_idx=s_idx,
        values=rescaled,
        u=float(u),
        sites=series.sites,
        n=n,
        marks=marks,
    )


def max_over_window(series: SpatioTemporalSeries, k: int, l: int) -> float:
    """max of ||X_j|| over k <= j <= l (1-based); -inf when k > l."""
    if k > l:
        return float("-inf")
    n = len(series)
    if k < 1 or l > n:
        raise IndexError(f"window [{k}, {l}] outside series of length {n}")
    return float(series.values[k - 1:l].max())
