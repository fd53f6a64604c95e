"""q-series special functions and scalar constants of the q-pushTASEP model.

Every function takes a :class:`PrecisionContext` selecting the arithmetic:

* ``"float"``    -- IEEE doubles, log-space accumulation where products underflow;
* ``"extended"`` -- mpmath floats with ``precision_bits`` of mantissa;
* ``"exact"``    -- :class:`fractions.Fraction` for anything that is a finite
  rational expression of rational inputs.  Infinite products/series are not
  rational, so in exact mode they are evaluated in extended precision.

Infinite series report a tail certificate through :class:`Certified`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from numbers import Rational
from typing import NamedTuple, Union

import mpmath

Number = Union[float, Fraction, "mpmath.mpf"]

MODES = ("float", "extended", "exact")


class DomainError(ValueError):
    """Argument outside the domain of a q-special function."""


@dataclass(frozen=True)
class PrecisionContext:
    mode: str = "float"
    precision_bits: int = 256
    truncation_eps: float = 1e-30

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown arithmetic mode {self.mode!r}")
        if self.mode == "extended" and self.precision_bits < 64:
            raise ValueError("extended mode needs precision_bits >= 64")
        if self.precision_bits < 1:
            raise ValueError("precision_bits must be positive")
        if not (0.0 < self.truncation_eps <= 1e-6):
            raise ValueError("truncation_eps must lie in (0, 1e-6]")

    @property
    def mp(self) -> mpmath.ctx_mp.MPContext:
        return _mp_context(max(self.precision_bits, 64))

    @property
    def uses_mp(self) -> bool:
        return self.mode != "float"

    def num(self, x):
        """Convert ``x`` into this context's number type."""
        if self.mode == "exact" and isinstance(x, (int, Rational, float)):
            return Fraction(x)
        if self.mode == "float":
            return float(x)
        if isinstance(x, Fraction):
            return self.mp.mpf(x.numerator) / x.denominator
        return self.mp.mpf(x)

    def real(self, x):
        """Convert to the context's real (non-rational) type."""
        if self.mode == "float":
            return float(x)
        if isinstance(x, Fraction):
            return self.mp.mpf(x.numerator) / x.denominator
        return self.mp.mpf(x)


FLOAT = PrecisionContext()


@lru_cache(maxsize=None)
def _mp_context(bits: int):
    ctx = mpmath.MPContext()
    ctx.prec = bits
    return ctx


class Certified(NamedTuple):
    """A value together with a bound on the truncated remainder."""

    value: object
    tail_bound: float


class QParams(NamedTuple):
    q: float
    u: float

    @classmethod
    def checked(cls, q, u) -> "QParams":
        for name, v in (("q", q), ("u", u)):
            if not (0 < v < 1):
                raise DomainError(f"{name}={v} must lie strictly inside (0, 1)")
        return cls(q, u)


def _check_q_open(q):
    if not (0 < q < 1):
        raise DomainError(f"q={q} must lie in (0, 1)")


# ---------------------------------------------------------------------------
# q-Pochhammer and q-binomial
# ---------------------------------------------------------------------------

def q_pochhammer(z, q, n=math.inf, ctx: PrecisionContext = FLOAT):
    """``(z; q)_n`` for finite ``n`` or ``n = inf``."""
    return q_pochhammer_certified(z, q, n, ctx).value


def q_pochhammer_certified(z, q, n=math.inf, ctx: PrecisionContext = FLOAT) -> Certified:
    if n == math.inf:
        _check_q_open(q)
        return _q_poch_infinite(z, q, ctx)
    n = int(n)
    if n < 0:
        raise DomainError("n must be a natural number or inf")
    if ctx.mode == "exact" and _is_rational(z) and _is_rational(q):
        z, q = Fraction(z), Fraction(q)
        out = Fraction(1)
        qi = Fraction(1)
        for _ in range(n):
            out *= 1 - z * qi
            qi *= q
        return Certified(out, 0.0)
    if ctx.uses_mp:
        mp = ctx.mp
        z, q = ctx.real(z), ctx.real(q)
        out = mp.mpf(1)
        for i in range(n):
            out *= 1 - z * q**i
        return Certified(out, 0.0)
    z, q = float(z), float(q)
    if z <= 0 or (z < 1 and q <= 1):
        # every factor 1 - z q^i is positive here
        s = 0.0
        for i in range(n):
            s += math.log1p(-z * q**i)
        return Certified(math.exp(s), 0.0)
    out = 1.0
    for i in range(n):
        out *= 1.0 - z * q**i
    return Certified(out, 0.0)


def _q_poch_infinite(z, q, ctx: PrecisionContext) -> Certified:
    eps = ctx.truncation_eps
    # stop once 2|z| q^i / (1-q) <= eps: the remaining factors then change the
    # product by a relative amount of at most expm1(eps)
    qf, zf = float(q), abs(float(z))
    if zf == 0.0:
        return Certified(ctx.num(1) if ctx.mode != "exact" else Fraction(1), 0.0)
    thresh = eps * (1 - qf) / 2
    if zf <= thresh:
        i_stop = 0
    else:
        i_stop = int(math.ceil(math.log(thresh / zf) / math.log(qf)))
    tail = 2 * zf * qf**i_stop / (1 - qf)
    if ctx.uses_mp:
        mp = ctx.mp
        zz, qq = ctx.real(z), ctx.real(q)
        out = mp.mpf(1)
        qi = mp.mpf(1)
        for _ in range(i_stop):
            out *= 1 - zz * qi
            qi *= qq
        return Certified(out, math.expm1(tail))
    zz, qq = float(z), qf
    if zz < 1:
        s = 0.0
        for i in range(i_stop):
            s += math.log1p(-zz * qq**i)
        return Certified(math.exp(s), math.expm1(tail))
    out = 1.0
    for i in range(i_stop):
        out *= 1.0 - zz * qq**i
    return Certified(out, math.expm1(tail))


def log_q_pochhammer_inf(z, q, eps=1e-30) -> float:
    """``log (z; q)_inf`` in double precision for ``z < 1``."""
    _check_q_open(q)
    if z >= 1:
        raise DomainError("log form needs z < 1")
    if z == 0:
        return 0.0
    thresh = eps * (1 - q) / 2
    i_stop = 0 if abs(z) <= thresh else int(math.ceil(math.log(thresh / abs(z)) / math.log(q)))
    return math.fsum(math.log1p(-z * q**i) for i in range(i_stop))


def q_binomial(n: int, k: int, q, ctx: PrecisionContext = FLOAT):
    """Gaussian binomial ``(q;q)_n / ((q;q)_k (q;q)_{n-k})``.

    Any base ``q > 0`` is accepted; ``q = 1`` gives the ordinary binomial.
    """
    n, k = int(n), int(k)
    if k < 0 or n < 0:
        raise DomainError("n, k must be natural numbers")
    if k > n:
        raise DomainError(f"k={k} exceeds n={n}")
    k = min(k, n - k)
    if ctx.mode == "exact" and _is_rational(q):
        q = Fraction(q)
        if q == 1:
            return Fraction(math.comb(n, k))
        out = Fraction(1)
        for i in range(1, k + 1):
            out = out * (1 - q ** (n - k + i)) / (1 - q**i)
        return out
    if ctx.uses_mp:
        mp = ctx.mp
        q = ctx.real(q)
        if q == 1:
            return mp.mpf(math.comb(n, k))
        out = mp.mpf(1)
        for i in range(1, k + 1):
            out = out * (1 - q ** (n - k + i)) / (1 - q**i)
        return out
    q = float(q)
    if q == 1.0:
        return float(math.comb(n, k))
    if q > 1:
        # binom(n,k)_{1/p} = p^{-k(n-k)} binom(n,k)_p
        p = 1.0 / q
        return math.exp(-k * (n - k) * math.log(p) + _log_qbinom(n, k, p))
    return math.exp(_log_qbinom(n, k, q))


def _log_qbinom(n: int, k: int, q: float) -> float:
    s = 0.0
    for i in range(1, k + 1):
        s += math.log1p(-(q ** (n - k + i))) - math.log1p(-(q**i))
    return s


def log_q_binomial(n: int, k: int, q: float) -> float:
    if not 0 <= k <= n:
        raise DomainError(f"k={k} outside [0, {n}]")
    _check_q_open(q)
    return _log_qbinom(n, min(k, n - k), q)


# ---------------------------------------------------------------------------
# q-gamma and q-digamma
# ---------------------------------------------------------------------------

def log_q_gamma(x, q, ctx: PrecisionContext = FLOAT):
    _check_q_open(q)
    if not x > 0:
        raise DomainError("q-gamma needs x > 0")
    if ctx.uses_mp:
        mp = ctx.mp
        x, qq = ctx.real(x), ctx.real(q)
        num = _q_poch_infinite(qq, qq, ctx).value
        den = _q_poch_infinite(qq**x, qq, ctx).value
        return mp.log(num) - mp.log(den) + (1 - x) * mp.log(1 - qq)
    x, q = float(x), float(q)
    eps = ctx.truncation_eps
    return (log_q_pochhammer_inf(q, q, eps) - log_q_pochhammer_inf(q**x, q, eps)
            + (1 - x) * math.log1p(-q))


def q_gamma(x, q, ctx: PrecisionContext = FLOAT):
    """``(q;q)_inf / (q^x;q)_inf * (1-q)^(1-x)``; raises OverflowError rather than saturating."""
    lg = log_q_gamma(x, q, ctx)
    if ctx.uses_mp:
        return ctx.mp.exp(lg)
    if lg > 709.0:
        raise OverflowError(f"q_gamma({x}, {q}) overflows double precision")
    return math.exp(lg)


def _series_stop(x: float, q: float, eps: float, weight: float, power: int) -> int:
    # smallest I with weight * 2 q^(I+x) / ((1-q)(1-q^(I+x))^power) < eps
    i = 0
    while True:
        a = q ** (i + x)
        if a < 0.5 and weight * 2 * a / ((1 - q) * (1 - a) ** power) < eps:
            return i
        i += 1 if a >= 0.5 else max(1, int(math.log(eps * (1 - q) / (4 * weight)) / math.log(q) - x - i))


def q_digamma_certified(x, q, ctx: PrecisionContext = FLOAT) -> Certified:
    """q-digamma via the Lambert-type series, with a geometric tail bound."""
    _check_q_open(q)
    if not x > 0:
        raise DomainError("q-digamma needs x > 0")
    xf, qf = float(x), float(q)
    lq = abs(math.log(qf))
    n_terms = _series_stop(xf, qf, ctx.truncation_eps, lq, 1)
    a_stop = qf ** (n_terms + xf)
    tail = lq * a_stop / ((1 - qf) * (1 - a_stop))
    if ctx.uses_mp:
        mp = ctx.mp
        xx, qq = ctx.real(x), ctx.real(q)
        s = mp.fsum(qq ** (i + xx) / (1 - qq ** (i + xx)) for i in range(n_terms))
        return Certified(-mp.log(1 - qq) + mp.log(qq) * s, tail)
    s = math.fsum(qf ** (i + xf) / -math.expm1((i + xf) * math.log(qf)) for i in range(n_terms))
    return Certified(-math.log1p(-qf) + math.log(qf) * s, tail)


def q_digamma(x, q, ctx: PrecisionContext = FLOAT):
    return q_digamma_certified(x, q, ctx).value


def q_trigamma(x, q, ctx: PrecisionContext = FLOAT):
    """First derivative of the q-digamma function (termwise)."""
    _check_q_open(q)
    xf, qf = float(x), float(q)
    lq = math.log(qf)
    n_terms = _series_stop(xf, qf, ctx.truncation_eps, lq * lq, 2)
    if ctx.uses_mp:
        mp = ctx.mp
        xx, qq = ctx.real(x), ctx.real(q)
        return mp.log(qq) ** 2 * mp.fsum(
            qq ** (i + xx) / (1 - qq ** (i + xx)) ** 2 for i in range(n_terms))
    return lq * lq * math.fsum(
        qf ** (i + xf) / (1 - qf ** (i + xf)) ** 2 for i in range(n_terms))


def q_digamma_second_certified(x, q, ctx: PrecisionContext = FLOAT) -> Certified:
    _check_q_open(q)
    if not x > 0:
        raise DomainError("q-digamma needs x > 0")
    xf, qf = float(x), float(q)
    lq3 = abs(math.log(qf)) ** 3
    n_terms = _series_stop(xf, qf, ctx.truncation_eps, lq3, 3)
    a_stop = qf ** (n_terms + xf)
    tail = lq3 * 2 * a_stop / ((1 - qf) * (1 - a_stop) ** 3)
    if ctx.uses_mp:
        mp = ctx.mp
        xx, qq = ctx.real(x), ctx.real(q)
        s = mp.fsum(qq ** (i + xx) * (1 + qq ** (i + xx)) / (1 - qq ** (i + xx)) ** 3
                    for i in range(n_terms))
        return Certified(mp.log(qq) ** 3 * s, tail)
    s = 0.0
    terms = []
    for i in range(n_terms):
        a = qf ** (i + xf)
        terms.append(a * (1 + a) / (1 - a) ** 3)
    s = math.fsum(terms)
    return Certified(math.log(qf) ** 3 * s, tail)


def q_digamma_second(x, q, ctx: PrecisionContext = FLOAT):
    """Second derivative of the q-digamma function; negative for every x > 0."""
    return q_digamma_second_certified(x, q, ctx).value


# ---------------------------------------------------------------------------
# model constants
# ---------------------------------------------------------------------------

def mu_q(q):
    """Right edge ``(1 + sqrt q)^2 / (1 - q)`` of the Meixner density, per unit N."""
    _check_q_open(q)
    s = math.sqrt(q)
    return (1 + s) ** 2 / (1 - q)


def log_base(u, q) -> float:
    return math.log(u) / math.log(q)


def f_q(q, u, ctx: PrecisionContext = FLOAT):
    """Law-of-large-numbers speed of ``x_N(N) / N``, via the q-digamma function."""
    QParams.checked(q, u)
    psi = q_digamma(log_base(u, q), q, ctx)
    if ctx.uses_mp:
        mp = ctx.mp
        qq = ctx.real(q)
        return 2 * (psi + mp.log(1 - qq)) / mp.log(qq) + 1
    return 2 * (psi + math.log1p(-q)) / math.log(q) + 1


def lln_series_certified(q, u, ctx: PrecisionContext = FLOAT) -> Certified:
    """``sum_i 2 u q^i / (1 - u q^i)`` summed directly."""
    QParams.checked(q, u)
    eps = ctx.truncation_eps
    terms = 0
    while True:
        a = u * q**terms
        if 2 * a / ((1 - q) * (1 - a)) < eps:
            break
        terms += 1
    a = u * q**terms
    tail = 2 * a / ((1 - q) * (1 - a))
    if ctx.uses_mp:
        mp = ctx.mp
        uu, qq = ctx.real(u), ctx.real(q)
        return Certified(mp.fsum(2 * uu * qq**i / (1 - uu * qq**i) for i in range(terms)), tail)
    return Certified(math.fsum(2 * u * q**i / (1 - u * q**i) for i in range(terms)), tail)


def f_q_direct(q, u, ctx: PrecisionContext = FLOAT):
    return lln_series_certified(q, u, ctx).value + 1


def verify_lln_identity(q, u, ctx: PrecisionContext = FLOAT) -> float:
    """Residual between the diagonal-squares speed series and ``f_q - 1``."""
    lhs = lln_series_certified(q, u, ctx).value
    rhs = f_q(q, u, ctx) - 1
    return float(abs(lhs - rhs))


def entropy(p) -> float:
    if not 0 <= p <= 1:
        raise DomainError("entropy needs p in [0, 1]")
    if p == 0 or p == 1:
        return 0.0
    return -p * math.log(p) - (1 - p) * math.log1p(-p)


def _is_rational(x) -> bool:
    return isinstance(x, (int, Rational)) or (isinstance(x, float) and math.isfinite(x))
