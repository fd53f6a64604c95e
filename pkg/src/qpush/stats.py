"""Small statistical helpers: Wilson intervals, discrete goodness of fit, chunked streams."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .sampling import RngStream


@dataclass(frozen=True)
class GofResult:
    statistic: float
    p_value: float
    dof: int = 0

    def passes(self, alpha: float) -> bool:
        return self.p_value > alpha


def wilson_interval(successes: int, n: int, confidence: float = 0.99) -> tuple:
    if n == 0:
        return (0.0, 1.0)
    ci = stats.binomtest(int(successes), int(n)).proportion_ci(confidence, method="wilson")
    return (float(ci.low), float(ci.high))


def _merge_bins(expected: np.ndarray, min_expected: float):
    """Group consecutive cells so that every group expects >= min_expected counts."""
    groups, cur, acc = [], [], 0.0
    for i, e in enumerate(expected):
        cur.append(i)
        acc += e
        if acc >= min_expected:
            groups.append(cur)
            cur, acc = [], 0.0
    if cur:
        if groups:
            groups[-1].extend(cur)
        else:
            groups.append(cur)
    return groups


def chi2_gof(samples: np.ndarray, pmf: np.ndarray, min_expected: float = 5.0) -> GofResult:
    """Chi-square fit of integer samples to a pmf on 0..len(pmf)-1 (rest lumped in the last cell)."""
    samples = np.asarray(samples)
    n = samples.size
    pmf = np.asarray(pmf, dtype=float)
    probs = np.append(pmf, max(0.0, 1.0 - pmf.sum()))
    counts = np.bincount(np.minimum(samples, pmf.size), minlength=probs.size)[: probs.size]
    groups = _merge_bins(probs * n, min_expected)
    obs = np.array([counts[g].sum() for g in groups], dtype=float)
    exp = np.array([probs[g].sum() for g in groups]) * n
    exp *= obs.sum() / exp.sum()
    if len(groups) < 2:
        return GofResult(0.0, 1.0, 0)
    res = stats.chisquare(obs, exp)
    return GofResult(float(res.statistic), float(res.pvalue), len(groups) - 1)


def chi2_two_sample(a: np.ndarray, b: np.ndarray, min_expected: float = 5.0) -> GofResult:
    """Homogeneity test of two integer samples via a 2 x K contingency table."""
    a, b = np.asarray(a), np.asarray(b)
    top = int(max(a.max(initial=0), b.max(initial=0)))
    ca = np.bincount(a, minlength=top + 1).astype(float)
    cb = np.bincount(b, minlength=top + 1).astype(float)
    groups = _merge_bins(np.minimum(ca, cb), min_expected)
    table = np.array([[ca[g].sum() for g in groups], [cb[g].sum() for g in groups]])
    if table.shape[1] < 2:
        return GofResult(0.0, 1.0, 0)
    res = stats.chi2_contingency(table, correction=False)
    return GofResult(float(res.statistic), float(res.pvalue), int(res.dof))


def ks_two_sample(a, b) -> GofResult:
    res = stats.ks_2samp(a, b)
    return GofResult(float(res.statistic), float(res.pvalue))


def discrete_ks_one_sample(samples: np.ndarray, cdf_at: np.ndarray) -> GofResult:
    """Sup distance between the empirical and a discrete reference CDF on 0..len-1.

    The p-value uses the continuous Kolmogorov law, which is conservative for
    discrete references.
    """
    samples = np.asarray(samples)
    n = samples.size
    grid = np.arange(cdf_at.size)
    emp = np.searchsorted(np.sort(samples), grid, side="right") / n
    d = float(np.max(np.abs(emp - cdf_at)))
    return GofResult(d, float(stats.kstwo.sf(d, n)))


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    m = max(len(p), len(q))
    return 0.5 * float(np.abs(np.pad(p, (0, m - len(p))) - np.pad(q, (0, m - len(q)))).sum())


def chunked_streams(seed: int, stream_base: int, total: int, chunk: int):
    """Yield ``(rng, start, count)``; chunk i always owns stream ``stream_base + i``."""
    for i, start in enumerate(range(0, total, chunk)):
        yield RngStream(seed, stream_base + i), start, min(chunk, total - start)
