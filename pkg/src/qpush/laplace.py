"""Laplace-method quantities for the factorial-moment sum.

The sum is

    S(k, N, q) = sum_{i=1}^{k-1} g(i/k) exp(k f(i/k)),
    f(x) = x log(1/q) + 2 H(x) + (k/N)(1 - x),    g(x) = 1 / (x (1 - x)),

and is compared against q^{-1/4} k^{1/2} ((1 + a)^2 / q)^k with
a = sqrt(q) exp(k / 2N).  All values are kept in log scale.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np

from .qspecial import entropy


@dataclass(frozen=True)
class LaplaceProfile:
    k: int
    N: int
    q: float
    x0: float
    stationarity_residual: float
    curvature: float  # f''(x0) = -2 (1 + a)^2 / a

    def f(self, x):
        return _f(x, self.k, self.N, self.q)

    @staticmethod
    def g(x):
        return 1.0 / (x * (1.0 - x))

    @property
    def peak_value(self) -> float:
        """f(x0) = log((1 + a)^2 / q)."""
        a = _a(self.k, self.N, self.q)
        return math.log((1 + a) ** 2 / self.q)


def _a(k, N, q) -> float:
    return math.sqrt(q) * math.exp(k / (2 * N))


def _f(x, k, N, q):
    if isinstance(x, np.ndarray):
        h = -x * np.log(x) - (1 - x) * np.log1p(-x)
    else:
        h = entropy(x)
    return x * math.log(1 / q) + 2 * h + (k / N) * (1 - x)


def _f_prime(x, k, N, q) -> float:
    return math.log(1 / q) + 2 * math.log((1 - x) / x) - k / N


def profile(k: int, N: int, q: float) -> LaplaceProfile:
    a = _a(k, N, q)
    x0 = 1 / (1 + a)
    return LaplaceProfile(k, N, q, x0, abs(_f_prime(x0, k, N, q)), -2 * (1 + a) ** 2 / a)


def displayed_curvature(k: int, N: int, q: float) -> float:
    """-(1 + a)^2 / a: half of f''(x0); the factor 2 from 2H is dropped in this form."""
    a = _a(k, N, q)
    return -(1 + a) ** 2 / a


def _log_terms(k: int, N: int, q: float) -> list:
    out = []
    for i in range(1, k):
        x = i / k
        out.append(-math.log(x) - math.log1p(-x) + k * _f(x, k, N, q))
    return out


def _logsumexp(terms) -> float:
    m = max(terms)
    return m + math.log(math.fsum(math.exp(t - m) for t in terms))


def log_sum_S(k: int, N: int, q: float, order=None) -> float:
    """log S; ``order`` optionally permutes the summation (reproducibility check)."""
    if k < 2:
        raise ValueError("S is an empty sum for k < 2")
    terms = _log_terms(k, N, q)
    if order is not None:
        terms = [terms[i] for i in order]
    return _logsumexp(terms)


def log_reference(k: int, N: int, q: float) -> float:
    a = _a(k, N, q)
    return -0.25 * math.log(q) + 0.5 * math.log(k) + k * math.log((1 + a) ** 2 / q)


def log_ratio(k: int, N: int, q: float) -> float:
    return log_sum_S(k, N, q) - log_reference(k, N, q)


@dataclass
class SBoundReport:
    rows: list  # (k, N, q, log S, log reference, log ratio)
    envelope: tuple  # (min ratio, max ratio)
    slopes: dict  # (q, N/k) -> slope of log ratio against log k

    def within(self, lo: float, hi: float) -> bool:
        return lo <= self.envelope[0] and self.envelope[1] <= hi

    def max_abs_slope(self) -> float:
        """nan when no (q, N/k) line has two points."""
        return max((abs(s) for s in self.slopes.values()), default=math.nan)


def bound_check_S(k_grid, N_multipliers, q_grid, k_min: int = 2) -> SBoundReport:
    """Envelope of S / reference over k in k_grid, N = m k, q >= k^{-2}."""
    rows = []
    for q in q_grid:
        for m in N_multipliers:
            for k in k_grid:
                N = int(m * k)
                if k < k_min or q < k**-2 or k > N:
                    continue
                ls, lr = log_sum_S(k, N, q), log_reference(k, N, q)
                rows.append((k, N, q, ls, lr, ls - lr))
    ratios = [math.exp(r[5]) for r in rows] or [math.nan]
    slopes = {}
    for q in q_grid:
        for m in N_multipliers:
            pts = [(math.log(r[0]), r[5]) for r in rows if r[2] == q and r[1] == int(m * r[0])]
            if len(pts) >= 2:
                xs, ys = zip(*pts)
                slopes[(q, m)] = float(np.polyfit(xs, ys, 1)[0])
    return SBoundReport(rows, (min(ratios), max(ratios)), slopes)


def theta_sum(gamma: float, eps: float = 1e-17) -> tuple:
    """(sum_{i in Z} exp(-gamma i^2), remainder bound)."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    I = max(1, math.ceil(math.sqrt(max(math.log(1 / eps), 1.0) / gamma)))
    body = 1 + 2 * math.fsum(math.exp(-gamma * i * i) for i in range(1, I + 1))
    r = math.exp(-gamma * (2 * I + 3))
    tail = 2 * math.exp(-gamma * (I + 1) ** 2) / (1 - r)
    return body, tail


def theta_sum_reference(gamma: float) -> float:
    """Jacobi theta_3(0, e^{-gamma}) from mpmath."""
    return float(mpmath.jtheta(3, 0, mpmath.exp(-gamma)))


@dataclass
class ThetaReport:
    rows: list  # (gamma, sum, sum * sqrt(gamma))
    fitted_C: float


def theta_sum_check(gamma_grid, M: float) -> ThetaReport:
    """Fit C with C^{-1} gamma^{-1/2} <= sum <= C gamma^{-1/2} over gamma in (0, M]."""
    rows = []
    for g in gamma_grid:
        if not 0 < g <= M:
            continue
        s, _ = theta_sum(g)
        rows.append((g, s, s * math.sqrt(g)))
    C = max(max(r[2], 1 / r[2]) for r in rows)
    return ThetaReport(rows, C)
