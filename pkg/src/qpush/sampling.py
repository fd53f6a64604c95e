"""Exact samplers and pmfs: geometric, q-geometric and the q-deformed beta binomial.

Randomness is drawn from :class:`RngStream`, a ``(seed, stream_id)`` pair
mapped onto a numpy ``SeedSequence`` so that streams are reproducible and
independent of how work is scheduled.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .qspecial import (
    FLOAT,
    DomainError,
    PrecisionContext,
    _log_qbinom,
    log_q_pochhammer_inf,
    q_binomial,
    q_pochhammer,
)

MASK64 = (1 << 64) - 1
QGEO_TABLE_TAIL = 1e-17


class SupportViolation(ValueError):
    """A pmf evaluated clearly negative: the parameters break the support convention."""


@dataclass
class RngStream:
    seed: int
    stream_id: int = 0
    _gen: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        if not (0 <= self.seed <= MASK64 and 0 <= self.stream_id <= MASK64):
            raise ValueError("seed and stream_id must be unsigned 64-bit integers")
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        self._gen = np.random.Generator(np.random.PCG64(ss))

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def uniform(self, size=None):
        """Uniforms on the half-open interval (0, 1]."""
        return 1.0 - self._gen.random(size)

    def spawn(self, stream_id: int) -> "RngStream":
        return RngStream(self.seed, stream_id)


# ---------------------------------------------------------------------------
# Geo(z): P(X >= k) = z^k
# ---------------------------------------------------------------------------

def _check_geo(z):
    if not (0 <= z < 1):
        raise DomainError(f"Geo parameter z={z} must lie in [0, 1)")


def geo_pmf(k: int, z):
    _check_geo(z)
    if k < 0:
        return 0 * z
    return (1 - z) * z**k


def geo_tail(k: int, z):
    """P(X >= k)."""
    _check_geo(z)
    return z ** max(k, 0)


def geo_sample(z: float, rng: RngStream, size=None):
    _check_geo(z)
    if z == 0:
        return 0 if size is None else np.zeros(size, dtype=np.int64)
    u = rng.uniform(size)
    x = np.floor(np.log(u) / math.log(z))
    if size is None:
        return int(x)
    return x.astype(np.int64)


# ---------------------------------------------------------------------------
# q-Geo(xi): pmf xi^s (xi;q)_inf / (q;q)_s
# ---------------------------------------------------------------------------

def _check_qgeo(xi, q):
    if not (0 < q < 1):
        raise DomainError(f"q={q} must lie in (0, 1)")
    if not (0 <= xi <= 1):
        raise DomainError(f"q-Geo parameter xi={xi} must lie in [0, 1]")


def qgeo_pmf(s: int, xi, q, ctx: PrecisionContext = FLOAT):
    _check_qgeo(xi, q)
    if s < 0:
        return 0.0
    if xi == 0:
        return 1.0 if s == 0 else 0.0
    if ctx.uses_mp:
        mp = ctx.mp
        xi_r, q_r = ctx.real(xi), ctx.real(q)
        head = xi_r**s / q_pochhammer(q_r, q_r, s, ctx)
        return head * q_pochhammer(xi_r, q_r, math.inf, ctx)
    if xi == 1:
        return 0.0
    log_p = (s * math.log(xi) + log_q_pochhammer_inf(xi, q)
             - sum(math.log1p(-(q**i)) for i in range(1, s + 1)))
    return math.exp(log_p)


@dataclass(frozen=True)
class QGeoTable:
    """Inverse-CDF table; the mass beyond the last entry is at most ``tail_bound``."""

    xi: float
    q: float
    pmf: np.ndarray
    cdf: np.ndarray
    tail_bound: float


@lru_cache(maxsize=256)
def qgeo_table(xi: float, q: float, tail: float = QGEO_TABLE_TAIL) -> QGeoTable:
    _check_qgeo(xi, q)
    if xi >= 1:
        raise DomainError("q-Geo(1) puts all its mass at infinity")
    if xi == 0:
        one = np.ones(1)
        return QGeoTable(xi, q, one, one, 0.0)
    p0 = math.exp(log_q_pochhammer_inf(xi, q))
    # mass beyond s: sum_{r>s} xi^r (xi;q)_inf/(q;q)_r <= p0 xi^(s+1) / ((q;q)_inf (1-xi))
    inv_qq = math.exp(-log_q_pochhammer_inf(q, q))
    probs = [p0]
    s = 0
    while p0 * xi ** (s + 1) * inv_qq / (1 - xi) >= tail:
        probs.append(probs[-1] * xi / (1 - q ** (s + 1)))
        s += 1
    pmf = np.array(probs)
    bound = p0 * xi ** (s + 1) * inv_qq / (1 - xi)
    cdf = np.cumsum(pmf)
    cdf[-1] = 1.0
    return QGeoTable(xi, q, pmf, cdf, bound)


def qgeo_sample(xi: float, q: float, rng: RngStream, size=None, ctx: PrecisionContext = FLOAT):
    _check_qgeo(xi, q)
    if xi == 0:
        return 0 if size is None else np.zeros(size, dtype=np.int64)
    table = qgeo_table(float(xi), float(q))
    u = rng.generator.random(size)
    idx = np.searchsorted(table.cdf, u, side="right")
    if size is None:
        return int(idx)
    return idx.astype(np.int64)


# ---------------------------------------------------------------------------
# q-deformed beta binomial
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QDBBParams:
    """phi_{b, xi, eta}(. | m) with base ``b = q ** exponent_sign``."""

    q: float
    exponent_sign: int
    xi: float
    eta: float
    m: int

    def __post_init__(self):
        if self.exponent_sign not in (1, -1):
            raise ValueError("exponent_sign must be +1 or -1")
        if not (0 < self.q < 1):
            raise DomainError("q must lie in (0, 1)")
        if self.xi < 0 or self.eta < 0:
            raise DomainError("xi and eta must be nonnegative")
        if self.m < 0 or self.m == math.inf:
            raise DomainError("only finite m is supported; the first particle is never pushed")

    @classmethod
    def push(cls, q, holes: int, m: int) -> "QDBBParams":
        """The push law used by q-pushTASEP: base 1/q, xi = q^holes, eta = 0."""
        xi = Fraction(q) ** holes if isinstance(q, Fraction) else q**holes
        return cls(q, -1, xi, 0, m)


def _signed_log_poch(a, base, n: int):
    """``(a; base)_n`` as ``(sign, log|.|)``; sign 0 flags an exact zero."""
    sign, logabs = 1, 0.0
    for i in range(n):
        t = a * base**i
        f = 1.0 - t
        # 1 - q^h q^{-h} is exactly zero but rounds to ~1e-16
        if abs(f) <= 64 * 2.220446049250313e-16 * max(1.0, abs(t)):
            return 0, -math.inf
        if f < 0:
            sign = -sign
        logabs += math.log(abs(f))
    return sign, logabs


def _qdbb_exact(s: int, p: QDBBParams) -> Fraction:
    q = Fraction(p.q)
    b = q if p.exponent_sign == 1 else 1 / q
    xi, eta = Fraction(p.xi), Fraction(p.eta)

    def poch(a, n):
        out = Fraction(1)
        for i in range(n):
            out *= 1 - a * b**i
        return out

    # (eta/xi; b)_s with eta = 0 is the empty-argument Pochhammer, equal to 1
    lead = poch(eta / xi, s) if eta != 0 else Fraction(1)
    num = xi**s * lead * poch(xi, p.m - s) * q_binomial(p.m, s, b, PrecisionContext("exact"))
    return num / poch(eta, p.m)


def _qdbb_float_raw(s: int, p: QDBBParams) -> float:
    b = p.q ** p.exponent_sign
    xi, eta = float(p.xi), float(p.eta)
    if xi == 0:
        return 1.0 if s == p.m else 0.0
    sign, logv = 1, s * math.log(xi)
    parts = []
    if eta != 0:
        parts.append(_signed_log_poch(eta / xi, b, s))
    parts.append(_signed_log_poch(xi, b, p.m - s))
    den = _signed_log_poch(eta, b, p.m)
    if den[0] == 0:
        raise DomainError("(eta; b)_m vanishes")
    for sg, lg in parts:
        if sg == 0:
            return 0.0
        sign *= sg
        logv += lg
    sign *= den[0]
    logv -= den[1]
    # binom(m, s)_{1/q} = q^{-s(m-s)} binom(m, s)_q
    kk = min(s, p.m - s)
    logv += _log_qbinom(p.m, kk, p.q) - (s * (p.m - s) * math.log(p.q) if p.exponent_sign == -1 else 0.0)
    return sign * math.exp(logv)


def qdbb_pmf(s: int, params: QDBBParams, ctx: PrecisionContext = FLOAT):
    if not 0 <= s <= params.m:
        return Fraction(0) if ctx.mode == "exact" else 0.0
    if ctx.mode == "exact":
        val = _qdbb_exact(s, params)
        if val < 0:
            raise SupportViolation(f"qdbb pmf({s}) = {val} < 0")
        return val
    val = _qdbb_float_raw(s, params)
    if val < -1e-9:
        raise SupportViolation(f"qdbb pmf({s}) = {val} < 0")
    return max(val, 0.0)


def qdbb_pmf_vector(params: QDBBParams, ctx: PrecisionContext = FLOAT) -> np.ndarray:
    """The whole pmf on ``0..m``; renormalized only when the defect is float noise."""
    vals = [qdbb_pmf(s, params, ctx) for s in range(params.m + 1)]
    if ctx.mode == "exact":
        total = sum(vals)
        if total != 1:
            raise SupportViolation(f"exact qdbb pmf sums to {total}")
        return np.array([float(v) for v in vals])
    out = np.array(vals, dtype=float)
    defect = abs(out.sum() - 1.0)
    if defect > 1e-6:
        raise SupportViolation(f"qdbb pmf sums to {out.sum()}")
    if defect > 1e-10:
        out /= out.sum()
    return out


def push_log_weights(q: float, holes: int, m: int) -> np.ndarray:
    """Log pmf of the push law indexed by ``r = m - P`` (the unused part of the push).

    With base 1/q, xi = q^holes and eta = 0 the pmf reduces to
    q^{P (holes - r)} (q^{holes - r + 1}; q)_r binom(m, r)_q for r <= min(m, holes),
    every term nonnegative.  Built by the ratio recursion in r.
    """
    r_max = min(m, holes)
    lq = math.log(q)
    w = np.empty(r_max + 1)
    w[0] = 0.0
    for r in range(r_max):
        w[r + 1] = (w[r] + lq * (1 - (holes - r) - (m - r))
                    + math.log1p(-(q ** (holes - r))) + math.log1p(-(q ** (m - r)))
                    - math.log1p(-(q ** (r + 1))))
    return w


def push_pmf(q: float, holes: int, m: int) -> np.ndarray:
    """pmf of the push amount P on ``0..m``."""
    w = push_log_weights(q, holes, m)
    w = np.exp(w - w.max())
    w /= w.sum()
    out = np.zeros(m + 1)
    out[m - np.arange(w.size)] = w
    return out


@lru_cache(maxsize=4096)
def _qdbb_cdf(params: QDBBParams) -> np.ndarray:
    cdf = np.cumsum(qdbb_pmf_vector(params))
    cdf[-1] = 1.0
    return cdf


def qdbb_sample(params: QDBBParams, rng: RngStream, size=None, ctx: PrecisionContext = FLOAT):
    if params.m == 0:
        return 0 if size is None else np.zeros(size, dtype=np.int64)
    cdf = _qdbb_cdf(params)
    idx = np.searchsorted(cdf, rng.generator.random(size), side="right")
    if size is None:
        return int(idx)
    return idx.astype(np.int64)
