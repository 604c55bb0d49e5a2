import math

import numpy as np
import pytest
from scipy.stats import chi2

from taeblp.measures import RateParams


@pytest.fixture(scope="session")
def params1():
    return RateParams(1.0)


@pytest.fixture(scope="session", autouse=True)
def _compiled_kernels():
    # compile the njit kernels once so timed tests see steady-state speed
    from taeblp.experiments import warmup_kernels

    warmup_kernels()


def rng_for(label: int):
    return np.random.default_rng(np.random.SeedSequence(20240800, spawn_key=(label,)))


def chi_square_pvalue(counts, probs):
    """Goodness of fit with pooling of bins whose expectation is below 5."""
    counts = np.asarray(counts, dtype=np.float64)
    probs = np.asarray(probs, dtype=np.float64)
    n = counts.sum()
    order = np.argsort(probs)[::-1]
    pooled_c, pooled_p = [], []
    acc_c = acc_p = 0.0
    for i in order:
        acc_c += counts[i]
        acc_p += probs[i]
        if acc_p * n >= 5.0:
            pooled_c.append(acc_c)
            pooled_p.append(acc_p)
            acc_c = acc_p = 0.0
    if acc_p > 0 and pooled_p:
        pooled_c[-1] += acc_c
        pooled_p[-1] += acc_p
    pooled_c = np.asarray(pooled_c)
    pooled_p = np.asarray(pooled_p)
    # account for mass outside the tabulated bins
    rest = 1.0 - pooled_p.sum()
    if rest > 1e-12:
        pooled_c = np.append(pooled_c, n - pooled_c.sum())
        pooled_p = np.append(pooled_p, rest)
    expected = n * pooled_p
    stat = float(((pooled_c - expected) ** 2 / expected).sum())
    dof = max(len(pooled_c) - 1, 1)
    return float(chi2.sf(stat, dof))


def assert_gof(samples, pmf_at, level=1e-4):
    """Chi-square test of integer samples against an exact pmf."""
    ks = np.arange(samples.min(), samples.max() + 1)
    counts = np.array([(samples == k).sum() for k in ks])
    probs = np.asarray(pmf_at(ks), dtype=np.float64)
    p = chi_square_pvalue(counts, probs)
    assert p > level, f"goodness-of-fit rejected: p={p:.2e}"
    return p


def stderr(x):
    x = np.asarray(x, dtype=np.float64)
    return float(x.std(ddof=1)) / math.sqrt(len(x))
