"""Stretched-exponential tails: MGF bounds and tails of sums with decaying scales.

Test laws have P(X >= t) = min(1, C1 exp(-rho t^{3/2})) exactly.  For a
family of rates the relevant scale sums are sigma_2 = sum rho_i^{-2} and
sigma_{2/3} = sum rho_i^{-2/3}.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .qspecial import Certified
from .sampling import RngStream
from .stats import chunked_streams, wilson_interval


@dataclass(frozen=True)
class TailFamily:
    rates: tuple
    C1: float = 1.0
    tail_sigma2: float = 0.0
    tail_sigma23: float = 0.0

    def __post_init__(self):
        if self.C1 < 1:
            raise ValueError("C1 >= 1 is needed for min(1, C1 e^{-rho t^1.5}) to be a tail function")
        if any(r <= 0 for r in self.rates):
            raise ValueError("rates must be positive")

    @property
    def sigma2(self) -> float:
        return sigma_sums(self.rates)[0]

    @property
    def sigma23(self) -> float:
        return sigma_sums(self.rates)[1]


def sigma_sums(rates) -> tuple:
    r = np.asarray(rates, dtype=float)
    return math.fsum(r**-2.0), math.fsum(r ** (-2.0 / 3.0))


def power_sigma(exponent: float, terms: int) -> Certified:
    """sum_{i>=1} i^{-exponent} with the remainder squeezed between two integrals."""
    if exponent <= 1:
        raise ValueError("series diverges")
    head = math.fsum(i**-exponent for i in range(1, terms + 1))
    lo = (terms + 1) ** (1 - exponent) / (exponent - 1)
    hi = terms ** (1 - exponent) / (exponent - 1)
    return Certified(head + 0.5 * (lo + hi), 0.5 * (hi - lo))


def scaled_geometric_rates(eps: float, count: int) -> np.ndarray:
    """rho_i = eps^{3/2} i^{3/2} q^{-i/2} with q = e^{-eps}, i = 1..count."""
    i = np.arange(1, count + 1, dtype=float)
    return eps**1.5 * i**1.5 * np.exp(eps * i / 2)


def scaled_geometric_sigma23(eps: float, rel_tol: float = 1e-12) -> float:
    """sigma_{2/3} for the family above, summed until the geometric tail is negligible."""
    # rho_i^{-2/3} = eps^{-1} i^{-1} e^{-eps i / 3}
    count = int(math.ceil(3 * math.log(1 / rel_tol) / eps)) + 10
    i = np.arange(1, count + 1, dtype=float)
    return math.fsum(np.exp(-eps * i / 3) / i) / eps


# ---------------------------------------------------------------------------
# single-variable law
# ---------------------------------------------------------------------------

def tail_prob(t, rho: float, C1: float = 1.0):
    t = np.asarray(t, dtype=float)
    return np.minimum(1.0, C1 * np.exp(-rho * np.maximum(t, 0.0) ** 1.5))


def sample_stretched(rho: float, C1: float, rng: RngStream, size) -> np.ndarray:
    u = rng.uniform(size)
    return (np.maximum(np.log(C1 / u), 0.0) / rho) ** (2.0 / 3.0)


def mean_stretched(rho: float, C1: float = 1.0) -> float:
    """E[X] = int_0^inf min(1, C1 e^{-rho t^1.5}) dt."""
    t0 = (math.log(C1) / rho) ** (2 / 3)
    # int_{t0}^inf C1 e^{-rho t^1.5} dt = C1 (2/3) rho^{-2/3} Gamma(2/3, rho t0^1.5)
    upper = C1 * (2 / 3) * rho ** (-2 / 3) * special.gamma(2 / 3) * special.gammaincc(2 / 3, rho * t0**1.5)
    return t0 + upper


def log_mgf(lam: float, rho: float, C1: float = 1.0) -> float:
    """log E[e^{lam X}] = log(1 + lam int_0^inf e^{lam x} P(X >= x) dx) by quadrature."""
    if lam == 0:
        return 0.0
    t0 = (math.log(C1) / rho) ** (2 / 3)
    # integrand exponent lam x - rho x^1.5 peaks at x* = (2 lam / (3 rho))^2
    x_star = max((2 * lam / (3 * rho)) ** 2, t0)
    peak = lam * x_star - rho * x_star**1.5 + math.log(C1) if x_star > t0 else lam * t0

    def log_h(x):
        return lam * x + min(0.0, math.log(C1) - rho * x**1.5) - peak

    def h(x):
        return math.exp(log_h(x))

    # past x_star the exponent is decreasing; stop once it is 60 below the peak
    upper = max(x_star, t0, rho ** (-2 / 3))
    while log_h(upper) > -60:
        upper *= 2
    pts = sorted({t0, x_star})
    val, _ = integrate.quad(h, 0.0, upper, points=[p for p in pts if 0 < p < upper], limit=400,
                            epsabs=0.0, epsrel=1e-11)
    # 1 + lam e^{peak} val, in log scale
    log_int = math.log(lam * val) + peak
    return log_int + math.log1p(math.exp(-log_int)) if log_int > 0 else math.log1p(math.exp(log_int))


def mgf_exponent_scale(lam: float, rho: float, C1: float = 1.0) -> float:
    """C1 (lam rho^{-2/3} + lam^3 rho^{-2}): the bound is exp(C times this)."""
    return C1 * (lam * rho ** (-2 / 3) + lam**3 * rho**-2)


@dataclass
class MGFReport:
    rows: list  # (rho, lam, log mgf, exponent scale, ratio)
    per_rho_C: dict
    fitted_C: float

    @property
    def stability(self) -> float:
        vals = list(self.per_rho_C.values())
        return max(vals) / min(vals)

    def holds(self) -> bool:
        return all(r[2] <= self.fitted_C * r[3] * (1 + 1e-12) for r in self.rows)


def mgf_bound_check(rhos, lambda_grid, C1: float = 1.0) -> MGFReport:
    rows, per = [], {}
    for rho in rhos:
        best = 0.0
        for lam in lambda_grid:
            lm = log_mgf(lam, rho, C1)
            scale = mgf_exponent_scale(lam, rho, C1)
            rows.append((rho, lam, lm, scale, lm / scale))
            best = max(best, lm / scale)
        per[rho] = best
    return MGFReport(rows, per, max(per.values()))


# ---------------------------------------------------------------------------
# sums
# ---------------------------------------------------------------------------

def sample_sums(family: TailFamily, samples: int, seed: int, stream_base: int = 0,
                chunk: int = 200_000) -> np.ndarray:
    rates = np.asarray(family.rates, dtype=float)
    out = np.empty(samples)
    for rng, start, count in chunked_streams(seed, stream_base, samples, chunk):
        u = rng.uniform((count, rates.size))
        x = (np.maximum(np.log(family.C1 / u), 0.0) / rates) ** (2.0 / 3.0)
        out[start:start + count] = x.sum(axis=1)
    return out


@dataclass
class SumTailReport:
    t_grid: list
    shift: float
    estimates: list
    intervals: list
    fitted_c: float
    slope: float | None
    slope_points: int


def _slope_fit(S: np.ndarray, shift, s_max: float, window, points: int = 31):
    """Exponent of -log P against (t - shift) from empirical quantiles inside ``window``.

    With ``shift == "fit"`` the shift is chosen by least squares on [0, s_max].
    Returns (slope, shift, number of quantile points).
    """
    ps = np.logspace(math.log10(window[0]), math.log10(window[1]), points)
    ps = ps[ps * S.size >= 10]
    if ps.size < 3:
        return None, 0.0 if shift == "fit" else shift, int(ps.size)
    tq = np.quantile(S, 1 - ps)
    y = np.log(-np.log(ps))
    shifts = np.linspace(0.0, s_max, 801) if shift == "fit" else [shift]
    best = None
    for s in shifts:
        x = tq - s
        if (x <= 0).any():
            break
        b, a = np.polyfit(np.log(x), y, 1)
        res = float(np.sum((y - a - b * np.log(x)) ** 2))
        if best is None or res < best[0]:
            best = (res, float(s), float(b))
    if best is None:
        return None, float(shifts[0]), int(ps.size)
    return best[2], best[1], int(ps.size)


def sum_tail_check(family: TailFamily, t_grid, samples: int, seed: int, stream_base: int = 0,
                   shift=0.0, window=(1e-4, 1e-1),
                   values: np.ndarray | None = None) -> SumTailReport:
    """Tail of sum X_i beyond shift + t, with the stretched-exponential exponent fitted.

    ``fitted_c`` is the largest c with P <= exp(-c sigma_2^{-1/2} t^{3/2})
    at every upper confidence limit on ``t_grid``.  ``slope`` regresses
    log(-log P) on log(t) using empirical quantiles at probabilities inside
    ``window``.  ``shift`` is a number, or "fit" to pick it by least squares
    in [0, C1 sigma_{2/3}] (the bound allows a shift of that order with an
    unspecified constant).
    """
    S = values if values is not None else sample_sums(family, samples, seed, stream_base)
    slope, shift, npts = _slope_fit(S, shift, family.C1 * family.sigma23, window)
    s2 = family.sigma2
    est, cis = [], []
    for t in t_grid:
        c = int(np.count_nonzero(S >= shift + t))
        est.append(c / S.size)
        cis.append(wilson_interval(c, S.size))
    cands = [-math.log(hi) / (t**1.5 / math.sqrt(s2)) for t, (_, hi) in zip(t_grid, cis) if t > 0 and hi < 1]
    fitted_c = min(cands) if cands else 0.0
    return SumTailReport(list(t_grid), shift, est, cis, fitted_c, slope, npts)


def first_term_quantile_ratio(family: TailFamily, S: np.ndarray, probs) -> list:
    """t_S(p) / t_1(p): quantiles of the sum over those of its slowest-decaying term."""
    rho1 = min(family.rates)
    t1 = (np.log(family.C1 / np.asarray(probs)) / rho1) ** (2 / 3)
    return list(np.quantile(S, 1 - np.asarray(probs)) / t1)
