import math

import numpy as np
import pytest
from scipy import stats


def within(a, b, tol):
    return abs(a - b) <= tol + 1e-12


def within_3se(a, b, se):
    return within(a, b, 3.0 * se)


def binom_se(p_hat, n):
    return math.sqrt(max(p_hat * (1.0 - p_hat), 1e-12) / n)


def poisson_chisquare_p(samples, mean, min_expected=5.0):
    """Chi-square goodness of fit of integer samples against Poisson(mean),
    merging tail bins until every expected count reaches min_expected."""
    samples = np.asarray(samples)
    n = len(samples)
    kmax = int(samples.max())
    ks = np.arange(kmax + 1)
    pmf = stats.poisson.pmf(ks, mean)
    pmf = np.append(pmf, 1.0 - pmf.sum())  # > kmax lump
    obs = np.bincount(samples, minlength=kmax + 1).astype(float)
    obs = np.append(obs, 0.0)
    # merge from the right until expected counts are large enough
    while len(pmf) > 2 and n * pmf[-1] < min_expected:
        pmf[-2] += pmf[-1]
        obs[-2] += obs[-1]
        pmf = pmf[:-1]
        obs = obs[:-1]
    chi2 = ((obs - n * pmf) ** 2 / (n * pmf)).sum()
    dof = len(pmf) - 1
    return float(stats.chi2.sf(chi2, dof))
