"""q-Whittaker polynomials by the branching rule, and the finite q-Whittaker measure.

The measure with all specialization parameters equal to u puts mass

    b_mu(q) P_mu(u^N; q) P_mu(u^T; q) / Pi

on partitions mu with at most min(N, T) rows; its top row has the law of
x_N(T) - N for q-pushTASEP from step initial condition.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

from .qspecial import FLOAT, DomainError, PrecisionContext, q_binomial, q_pochhammer


@dataclass(frozen=True, order=True)
class PartitionShape:
    parts: tuple

    def __post_init__(self):
        parts = tuple(int(p) for p in self.parts)
        if any(p < 0 for p in parts) or any(a < b for a, b in zip(parts, parts[1:])):
            raise ValueError(f"{parts} is not a partition")
        while parts and parts[-1] == 0:
            parts = parts[:-1]
        object.__setattr__(self, "parts", parts)

    @property
    def length(self) -> int:
        return len(self.parts)

    @property
    def size(self) -> int:
        return sum(self.parts)

    def part(self, i: int) -> int:
        """0-based part with implicit trailing zeros."""
        return self.parts[i] if i < len(self.parts) else 0


def _shape(mu) -> PartitionShape:
    return mu if isinstance(mu, PartitionShape) else PartitionShape(tuple(mu))


def interlaces(eta, mu) -> bool:
    """``eta < mu``: mu_1 >= eta_1 >= mu_2 >= eta_2 >= ..."""
    eta, mu = _shape(eta), _shape(mu)
    if eta.length > mu.length or mu.length > eta.length + 1:
        return False
    for i in range(mu.length):
        if not (mu.part(i) >= eta.part(i) >= mu.part(i + 1)):
            return False
    return True


_qbinom = lru_cache(maxsize=1 << 16)(q_binomial)


def _branch_weight(mu: PartitionShape, eta: PartitionShape, q, ctx):
    w = 1
    for i in range(mu.length):
        w = w * _qbinom(mu.part(i) - mu.part(i + 1), mu.part(i) - eta.part(i), q, ctx)
    return w


def qwhittaker_single_variable(mu, eta, z, q, ctx: PrecisionContext = FLOAT):
    mu, eta = _shape(mu), _shape(eta)
    if not interlaces(eta, mu):
        return ctx.num(0)
    return ctx.num(z) ** (mu.size - eta.size) * _branch_weight(mu, eta, q, ctx)


def sub_interlacing(mu: PartitionShape, max_len: int):
    """All eta with eta < mu and at most ``max_len`` rows."""
    ranges = [range(mu.part(i + 1), mu.part(i) + 1) for i in range(mu.length)]
    for choice in itertools.product(*ranges):
        eta = PartitionShape(choice)
        if eta.length <= max_len:
            yield eta


def _guard(mu: PartitionShape, n: int, ctx: PrecisionContext):
    if ctx.mode != "exact" and (mu.size > 60 or n > 8):
        raise DomainError("branching sum too large outside exact mode (|mu| > 60 or n > 8)")


def qwhittaker_skew(mu, nu, x, q, ctx: PrecisionContext = FLOAT):
    """P_{mu/nu}(x_1..x_n): sum over chains nu = l^0 < l^1 < ... < l^n = mu."""
    mu, nu = _shape(mu), _shape(nu)
    x = [ctx.num(v) for v in x]
    q = ctx.num(q)
    _guard(mu, len(x), ctx)

    @lru_cache(maxsize=None)
    def rec(n: int, lam: PartitionShape):
        if n == 0:
            return ctx.num(1) if lam == nu else ctx.num(0)
        total = ctx.num(0)
        for eta in sub_interlacing(lam, lam.length):
            if any(eta.part(i) < nu.part(i) for i in range(nu.length)):
                continue
            if eta.length < nu.length:
                continue
            sub = rec(n - 1, eta)
            if sub:
                total += sub * x[n - 1] ** (lam.size - eta.size) * _branch_weight(lam, eta, q, ctx)
        return total

    return rec(len(x), mu)


def qwhittaker_poly(mu, x, q, ctx: PrecisionContext = FLOAT):
    mu = _shape(mu)
    if mu.length > len(x):
        return ctx.num(0)
    return qwhittaker_skew(mu, PartitionShape(()), x, q, ctx)


def b_mu(mu, q, ctx: PrecisionContext = FLOAT):
    mu = _shape(mu)
    q = ctx.num(q)
    out = ctx.num(1)
    for i in range(mu.length):
        out = out / q_pochhammer(q, q, mu.part(i) - mu.part(i + 1), ctx)
    return out


def normalization_Pi(a, b, q, ctx: PrecisionContext = FLOAT):
    """prod_{i,j} 1 / (a_i b_j; q)_inf."""
    out = ctx.real(1)
    for ai in a:
        for bj in b:
            out = out / q_pochhammer(ctx.real(ai) * ctx.real(bj), ctx.real(q), math.inf, ctx)
    return out


@dataclass(frozen=True)
class TruncatedMeasure:
    support: tuple
    probabilities: tuple
    cap: int
    tail_mass_bound: float


def _partitions_capped(max_len: int, cap: int):
    """Partitions with <= max_len rows and parts <= cap, ordered by size then lexicographically."""
    shapes = []

    def gen(prefix, remaining, top):
        shapes.append(PartitionShape(tuple(prefix)))
        if remaining == 0:
            return
        for p in range(1, top + 1):
            gen(prefix + [p], remaining - 1, p)

    gen([], max_len, cap)
    return sorted(shapes, key=lambda s: (s.size, s.parts))


def _principal_values(n: int, shapes, q, ctx):
    """P_mu(1, ..., 1) with n ones for every shape, by the branching recursion."""
    width = max((mu.length for mu in shapes), default=0)
    keys = [mu.parts + (0,) * (width - mu.length) for mu in shapes]
    level = {(0,) * width: ctx.num(1)}
    for k in range(1, n + 1):
        nxt = {}
        for key, mu in zip(keys, shapes):
            if mu.length > k:
                continue
            padded = key + (0,)
            # eta_i ranges over [mu_{i+1}, mu_i]; rows beyond k-1 must vanish
            ranges = [range(padded[i + 1], padded[i] + 1) if i < k - 1 else range(0, 1)
                      for i in range(width)]
            weights = [[_qbinom(padded[i] - padded[i + 1], padded[i] - e, q, ctx) for e in r]
                       for i, r in enumerate(ranges)]
            total = ctx.num(0)
            for idx in itertools.product(*[range(len(r)) for r in ranges]):
                eta = tuple(r[j] for r, j in zip(ranges, idx))
                prev = level.get(eta)
                if prev:
                    w = prev
                    for i, j in enumerate(idx):
                        w = w * weights[i][j]
                    total += w
            nxt[key] = total
        level = nxt
    return {mu: level.get(key, ctx.num(0)) for key, mu in zip(keys, shapes)}


def truncated_measure(N: int, T: int, u, q, M_cap: int, ctx: PrecisionContext = FLOAT,
                      tol: float | None = None) -> TruncatedMeasure:
    if N > 4 or T > 4 or M_cap > 30:
        raise DomainError("truncated measure limited to N, T <= 4 and M_cap <= 30")
    if N < 0 or T < 0 or M_cap < 0:
        raise DomainError("N, T and M_cap must be natural numbers")
    shapes = _partitions_capped(min(N, T), M_cap)
    qq = ctx.num(q)
    pN = _principal_values(N, shapes, qq, ctx)
    pT = pN if T == N else _principal_values(T, shapes, qq, ctx)
    u2 = ctx.num(u) ** 2
    norm = q_pochhammer(ctx.real(u2), ctx.real(q), math.inf, ctx) ** (N * T)
    probs = []
    for mu in shapes:
        w = b_mu(mu, qq, ctx) * pN[mu] * pT[mu] * u2**mu.size
        probs.append(float(ctx.real(w) * norm))
    tail = 1.0 - math.fsum(probs)
    if tol is not None and tail > tol:
        raise DomainError(f"cap too small: unaccounted mass {tail:.3e} > {tol:.3e}")
    return TruncatedMeasure(tuple(shapes), tuple(probs), M_cap, max(tail, 0.0))


def top_row_marginal(measure: TruncatedMeasure) -> list:
    """Law of mu_1 on 0..cap (mass beyond the cap is ``measure.tail_mass_bound``)."""
    law = [0.0] * (measure.cap + 1)
    for mu, p in zip(measure.support, measure.probabilities):
        law[mu.part(0)] += p
    return law


def schur_brute_force(mu, x) -> float:
    """Schur polynomial by enumerating semistandard tableaux (small shapes only)."""
    mu = _shape(mu)
    n = len(x)
    cells = [(r, c) for r in range(mu.length) for c in range(mu.part(r))]
    total = 0.0
    for filling in itertools.product(range(n), repeat=len(cells)):
        t = dict(zip(cells, filling))
        ok = all(
            (c == 0 or t[(r, c - 1)] <= t[(r, c)]) and (r == 0 or t[(r - 1, c)] < t[(r, c)])
            for r, c in cells
        )
        if ok:
            total += math.prod(x[v] for v in filling)
    return total

