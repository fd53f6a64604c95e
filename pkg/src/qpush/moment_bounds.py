"""Checks of polynomial/factorial moment bounds for the expected empirical law nu_{q,N}.

Two kinds of statement are checked.  The general inequalities linking
E[X^k] and E[(X)_k] hold for every non-negative integer-valued X; they are
evaluated on nu_{q,N} with exact rational inputs (the density of nu is
rational for rational q) and compared at high precision.  The asymptotic
statements have non-explicit constants, so each report fits the constant
band on the grid and reports how stable it is.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath

from . import meixner
from .qspecial import mu_q


# ---------------------------------------------------------------------------
# exact law
# ---------------------------------------------------------------------------

def exact_nu_density(q: Fraction, N: int, x_max: int) -> list:
    """nu_{q,N}(x) for x = 0..x_max as Fractions: (1-q) q^x / N * sum_n pi_n(x)^2 / h_n."""
    q = Fraction(q)
    coeffs = [meixner.closed_form_recurrence(q, n) for n in range(N)]
    h = [Fraction(1)]
    for n in range(1, N):
        h.append(h[-1] * coeffs[n][1])
    out = []
    w = (1 - q)
    for x in range(x_max + 1):
        prev, cur, s = Fraction(0), Fraction(1), Fraction(0)
        for n in range(N):
            s += cur * cur / h[n]
            b, a = coeffs[n]
            prev, cur = cur, (x - b) * cur - (a * prev if n > 0 else 0)
        out.append(w * s / N)
        w *= q
    return out


@dataclass
class InequalityRow:
    """One evaluated inequality ``lhs <= rhs``; ``holds`` is decided at high precision."""
    name: str
    q: Fraction
    N: int
    k: int
    R: float
    lhs: float
    rhs: float
    holds: bool


def _mpf(v):
    return mpmath.mpf(v.numerator) / v.denominator if isinstance(v, Fraction) else mpmath.mpf(v)


def upper_lemma(q: Fraction, N: int, k: int, R: float, bits: int = 256) -> InequalityRow:
    """E[X^k 1_{X >= R}] <= E[(X)_k] exp(k^2/2R + k^3/3R^2), valid for R >= 2k."""
    if R < 2 * k:
        raise ValueError("the inequality needs R >= 2k")
    r0 = math.ceil(R)
    dens = exact_nu_density(q, N, max(r0 - 1, 0))
    below = sum((Fraction(x) ** k * d for x, d in enumerate(dens) if x < r0), Fraction(0))
    lhs = meixner.polynomial_moment_exact(q, N, k) - below
    with mpmath.workprec(bits):
        R_ = _mpf(R)
        rhs = _mpf(meixner.factorial_moment(q, k, N)) * mpmath.exp(k**2 / (2 * R_) + k**3 / (3 * R_**2))
        lhs_ = _mpf(lhs)
        return InequalityRow("upper", q, N, k, float(R), float(lhs_), float(rhs), bool(lhs_ <= rhs))


def lower_lemma(q: Fraction, N: int, k: int, R: float, bits: int = 256) -> InequalityRow:
    """(E[(X)_k] - E[X^{2k}]^{1/2} P(X > R)^{1/2}) exp(k(k-1)/2R) <= E[X^k], any R > 0."""
    if R <= 0:
        raise ValueError("R must be positive")
    dens = exact_nu_density(q, N, math.floor(R))
    p_above = 1 - sum(dens, Fraction(0))
    with mpmath.workprec(bits):
        bound = (_mpf(meixner.factorial_moment(q, k, N))
                 - mpmath.sqrt(_mpf(meixner.polynomial_moment_exact(q, N, 2 * k)) * _mpf(p_above))) \
            * mpmath.exp(mpmath.mpf(k * (k - 1)) / (2 * _mpf(R)))
        target = _mpf(meixner.polynomial_moment_exact(q, N, k))
        return InequalityRow("lower", q, N, k, float(R), float(bound), float(target), bool(bound <= target))


def lemma_checks(q_grid, N_grid, k_grid) -> list:
    """Both inequalities on the grid, each at three radii."""
    rows = []
    for q in q_grid:
        q = Fraction(q)
        mu = mu_q(float(q))
        for N in N_grid:
            for k in k_grid:
                for R in sorted({2 * k, 3 * k, max(2 * k, mu * N)}):
                    rows.append(upper_lemma(q, N, k, R))
                for R in sorted({float(k), mu * N, mu * N * (1 + N ** (-1 / 3))}):
                    rows.append(lower_lemma(q, N, k, R))
    return rows


# ---------------------------------------------------------------------------
# fitted-constant reports
# ---------------------------------------------------------------------------

@dataclass
class EnvelopeReport:
    name: str
    rows: list  # (q, N, k, log value, log reference, log ratio)
    per_N: dict = field(default_factory=dict)  # N -> (min log ratio, max log ratio)
    per_q: dict = field(default_factory=dict)

    @property
    def envelope(self) -> tuple:
        lr = [r[5] for r in self.rows]
        return math.exp(min(lr)), math.exp(max(lr))

    @property
    def drift(self) -> float:
        """Largest movement of either envelope endpoint (log scale) between grid values of N."""
        lows = [v[0] for v in self.per_N.values()]
        highs = [v[1] for v in self.per_N.values()]
        return max(max(lows) - min(lows), max(highs) - min(highs))

    @property
    def per_q_spread(self) -> float:
        return max(hi - lo for lo, hi in self.per_q.values())

    @property
    def stability(self) -> float:
        """Max ratio between the per-N fitted constants (upper and lower)."""
        lows = [v[0] for v in self.per_N.values()]
        highs = [v[1] for v in self.per_N.values()]
        return math.exp(max(max(lows) - min(lows), max(highs) - min(highs)))


def _finish(name, rows) -> EnvelopeReport:
    rep = EnvelopeReport(name, rows)
    for key, idx in (("per_N", 1), ("per_q", 0)):
        groups: dict = {}
        for r in rows:
            groups.setdefault(r[idx], []).append(r[5])
        setattr(rep, key, {g: (min(v), max(v)) for g, v in groups.items()})
    return rep


def _k_range(N: int, q: float, k_min: int, W: float):
    return [k for k in range(k_min, int(W * N ** (2 / 3) + 1e-9) + 1) if q >= k ** -2]


def _log_reference(q: float, N: int, k: int, with_gaussian: bool) -> float:
    mu = mu_q(q)
    lr = -1.5 * math.log(q ** (1 / 6) * k) + k * math.log(mu * N)
    return lr - k * k / (2 * mu * N) if with_gaussian else lr


def _log_fraction(v: Fraction) -> float:
    return math.log(v.numerator) - math.log(v.denominator)


def factorial_asymptotics(q_grid, N_grid, k_min: int = 5, W: float = 1.0) -> EnvelopeReport:
    """E[(X)_k] / [(q^{1/6} k)^{-3/2} (mu_q N)^k exp(-k^2 / 2 mu_q N)] in exact arithmetic."""
    rows = []
    for q in q_grid:
        qf = float(q)
        for N in N_grid:
            for k in _k_range(N, qf, k_min, W):
                lv = _log_fraction(meixner.factorial_moment(Fraction(q), k, N))
                lr = _log_reference(qf, N, k, True)
                rows.append((qf, N, k, lv, lr, lv - lr))
    return _finish("factorial_asymptotics", rows)


def polynomial_moment_bounds(q_grid, N_grid, k_min: int = 1, W: float = 1.0) -> EnvelopeReport:
    """E[X^k] / [(q^{1/6} k)^{-3/2} (mu_q N)^k]; fitted c = min ratio, C = max ratio."""
    rows = []
    for q in q_grid:
        qf = float(q)
        for N in N_grid:
            for k in _k_range(N, qf, k_min, W):
                lv = _log_fraction(meixner.polynomial_moment_exact(Fraction(q), N, k))
                lr = _log_reference(qf, N, k, False)
                rows.append((qf, N, k, lv, lr, lv - lr))
    return _finish("polynomial_moment_bounds", rows)


@dataclass
class TailLowerReport:
    N: int
    rows: list  # (q, eps, threshold, probability, probability / eps^{3/2})
    per_q: dict

    @property
    def fitted_c(self) -> float:
        return min(self.per_q.values())

    @property
    def stability(self) -> float:
        v = list(self.per_q.values())
        return max(v) / min(v)


def tail_lower_bound(N: int, q_grid, eps_grid) -> TailLowerReport:
    """nu([mu_q N (1 - q^{1/6} eps), inf)) / eps^{3/2} over q >= eps^3."""
    rows, per = [], {}
    for q in q_grid:
        qf = float(q)
        nu = meixner.nu_measure(meixner.build_basis(qf, N), N)
        mu = mu_q(qf)
        for eps in eps_grid:
            if qf < eps**3:
                continue
            thr = mu * N * (1 - qf ** (1 / 6) * eps)
            p = nu.tail(thr)
            rows.append((qf, eps, thr, p, p / eps**1.5))
            per[qf] = min(per.get(qf, math.inf), p / eps**1.5)
    return TailLowerReport(N, rows, per)


@dataclass
class CrudeTailReport:
    rows: list  # (q, N, threshold, probability, -log P / N^{1/3})

    @property
    def fitted_L(self) -> float:
        return min(r[4] for r in self.rows)


def crude_upper_tail(q_grid, N_grid) -> CrudeTailReport:
    """nu([mu_q N (1 + N^{-1/3}), inf)); the fitted L is the smallest -log P / N^{1/3}."""
    rows = []
    for q in q_grid:
        qf = float(q)
        for N in N_grid:
            nu = meixner.nu_measure(meixner.build_basis(qf, N), N)
            thr = mu_q(qf) * N * (1 + N ** (-1 / 3))
            p = nu.tail(thr)
            rows.append((qf, N, thr, p, -math.log(p) / N ** (1 / 3)))
    return CrudeTailReport(rows)
