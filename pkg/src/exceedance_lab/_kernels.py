"""Hot numeric kernels: max-autoregressive series generation.

Each kernel exists in two implementations, a ``@njit`` loop and a
vectorized pure-numpy equivalent; ``_backend.active_backend()`` picks one
at call time. Inputs are pre-drawn uniforms (the counter-based RNG lives
outside the kernels so results are independent of backend and threading).

Model recursion, per site s:

    Z_t(s) = max(lam * V_t, W_t(s)),  V, W iid standard Frechet(alpha)
    X_t(s) = max(a * X_{t-1}(s), (1 - a) * Z_t(s)),  X_{-1} = 0

Frechet sampling is by inverse CDF, x = (-ln U)^(-1/alpha).
"""

from __future__ import annotations

import numpy as np

from ._backend import active_backend, have_numba

if have_numba():
    from numba import njit
else:  # pragma: no cover - exercised only when numba is absent
    def njit(*args, **kwargs):
        def wrap(f):
            return f
        return wrap


@njit(cache=True, nogil=True)
def _maxar_fill_numba(u_w, u_v, a, lam, inv_alpha, out):
    T, S = u_w.shape
    for t in range(T):
        common = 0.0
        if lam > 0.0:
            common = lam * (-np.log(u_v[t])) ** (-inv_alpha)
        for s in range(S):
            z = (-np.log(u_w[t, s])) ** (-inv_alpha)
            if common > z:
                z = common
            x = (1.0 - a) * z
            if t > 0:
                prev = a * out[t - 1, s]
                if prev > x:
                    x = prev
            out[t, s] = x


def _maxar_fill_numpy(u_w, u_v, a, lam, inv_alpha, out):
    T, S = u_w.shape
    with np.errstate(divide="ignore"):
        ln_z = -inv_alpha * np.log(-np.log(u_w))
        if lam > 0.0:
            ln_v = np.log(lam) - inv_alpha * np.log(-np.log(u_v))
            np.maximum(ln_z, ln_v[:, None], out=ln_z)
    if a == 0.0:
        np.exp(ln_z, out=out)
        return
    # X_t = (1-a) max_{0<=j<=t} a^(t-j) Z_j; in log space the inner max is a
    # cumulative maximum of ln Z_j - j ln a, which vectorizes.
    ln_a = np.log(a)
    j = np.arange(T, dtype=np.float64)[:, None]
    g = ln_z - j * ln_a
    np.maximum.accumulate(g, axis=0, out=g)
    out[:] = np.exp(np.log1p(-a) + j * ln_a + g)


def maxar_series(u_w: np.ndarray, u_v: np.ndarray, a: float, lam: float,
                 inv_alpha: float) -> np.ndarray:
    """Generate one max-AR series from uniforms.

    Parameters
    ----------
    u_w : (T, S) uniforms for the site-level innovations.
    u_v : (T,) uniforms for the common spatial factor (ignored if lam == 0;
        may be a length-1 dummy in that case).
    a, lam, inv_alpha : recursion coefficient, common-factor weight, 1/alpha.

    Returns
    -------
    (T, S) array; row t is X_t started from X_{-1} = 0 (caller discards
    burn-in rows).
    """
    out = np.empty_like(u_w)
    if active_backend() == "numba":
        _maxar_fill_numba(u_w, u_v, a, lam, inv_alpha, out)
    else:
        _maxar_fill_numpy(u_w, u_v, a, lam, inv_alpha, out)
    return out


@njit(cache=True, nogil=True)
def _window_flags_numba(norms, anchors, m_values, r_n, thr):
    """For each anchor t and each m, 1 if max over m<=|j|<=r_n of
    norms[t+j] exceeds thr."""
    n_anchor = anchors.shape[0]
    n_m = m_values.shape[0]
    out = np.zeros((n_anchor, n_m), dtype=np.uint8)
    for i in range(n_anchor):
        t = anchors[i]
        # running outward maxima: for sorted m grid, reuse suffix maxima
        for k in range(n_m):
            m = m_values[k]
            hit = 0
            for j in range(m, r_n + 1):
                if norms[t + j] > thr or norms[t - j] > thr:
                    hit = 1
                    break
            out[i, k] = hit
    return out


def _window_flags_numpy(norms, anchors, m_values, r_n, thr):
    offs = np.arange(1, r_n + 1)
    exceed = (norms[anchors[:, None] + offs[None, :]] > thr) | \
             (norms[anchors[:, None] - offs[None, :]] > thr)
    # suffix any: hit for lag >= m
    suffix = np.zeros_like(exceed)
    np.logical_or.accumulate(exceed[:, ::-1], axis=1, out=suffix)
    suffix = suffix[:, ::-1]
    out = np.zeros((len(anchors), len(m_values)), dtype=np.uint8)
    for k, m in enumerate(m_values):
        if m > r_n:
            continue
        out[:, k] = suffix[:, m - 1]
    return out


def window_exceedance_flags(norms: np.ndarray, anchors: np.ndarray,
                            m_values: np.ndarray, r_n: int,
                            thr: float) -> np.ndarray:
    """Anti-clustering window scan around exceedance anchors.

    Entry (i, k) is 1 iff max_{m_k <= |j| <= r_n} norms[anchors[i] + j] > thr.
    Anchors must satisfy r_n <= t < len(norms) - r_n. m_values must be
    sorted ascending, all >= 1.
    """
    if active_backend() == "numba":
        return _window_flags_numba(norms, anchors, m_values, r_n, thr)
    return _window_flags_numpy(norms, anchors, m_values, r_n, thr)
