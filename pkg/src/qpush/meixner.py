"""The Meixner ensemble with weight (1 - q) q^x on the nonnegative integers.

Orthonormal polynomials M_n are built by the Stieltjes procedure on the
(truncated) weight.  Everything downstream is expressed through the weighted
functions psi_n(x) = M_n(x) sqrt(w(x)), which stay bounded by 1 and avoid the
overflow/underflow of M_n(x) and q^x separately.

Two evaluation routes are kept apart on purpose:

* the basis stores psi_n on the support as produced by the orthogonalization
  itself (Gram matrices and determinants use these);
* the three-term recurrence, run in extended precision, gives the
  Christoffel-Darboux kernel.  In doubles the forward recurrence is unstable
  wherever psi_n decays in n (near x = 0 for small q).

With N particles the top particle lambda_1 satisfies

    P(lambda_1 <= t - 1) = det(I - K^t),

where K^t is the N x N Gram matrix of M_0..M_{N-1} over {t, t+1, ...}, and
lambda_1 - N + 1 has the law of the N x N Geo(q) last-passage value.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .qspecial import FLOAT, DomainError, PrecisionContext, mu_q

CD_MIN_BITS = 256


class PrecisionInsufficient(ArithmeticError):
    """Orthonormality residual of a built basis exceeds 1e-8."""


@dataclass(frozen=True, eq=False)
class MeixnerBasis:
    """Recurrence data and orthonormal functions for M_0..M_D.

    ``b[n]`` and ``a[n]`` are the monic three-term recurrence coefficients
    pi_{n+1} = (x - b_n) pi_n - a_n pi_{n-1}; ``kappa[n]`` is the leading
    coefficient of M_n.  ``vectors[n, x]`` is psi_n(x) for x = 0..support_max.
    """

    q: float
    D: int
    b: np.ndarray
    a: np.ndarray
    kappa: np.ndarray
    residual: float
    support_max: int
    mode: str
    vectors: np.ndarray = field(repr=False)
    exact_b: tuple = ()
    exact_a: tuple = ()

    @property
    def sqrt_a(self) -> np.ndarray:
        return np.sqrt(self.a)


def closed_form_recurrence(q, n: int):
    """(b_n, a_n) of the monic Meixner recurrence for weight (1-q) q^x."""
    return (n + (n + 1) * q) / (1 - q), n * n * q / (1 - q) ** 2


def geo_moments(q, count: int) -> list:
    """E[X^j] for X ~ Geo(q), j < count, from m_j (1 - q) = q sum_{i<j} C(j, i) m_i."""
    m = [Fraction(1) if isinstance(q, Fraction) else 1.0]
    for j in range(1, count):
        m.append(q * sum(math.comb(j, i) * m[i] for i in range(j)) / (1 - q))
    return m


def support_size(q: float, D: int, eps: float = 1e-30) -> int:
    """Last lattice point kept: beyond it q^x x^{2D} is below eps."""
    lq = math.log(q)
    xbar = mu_q(q) * (D + 1) + 10.0
    x = xbar
    for _ in range(50):
        x_new = max(xbar, (math.log(eps) - 2 * D * math.log(x)) / lq)
        if abs(x_new - x) < 0.5:
            break
        x = x_new
    return int(math.ceil(x)) + 1


def build_basis(q, D: int, ctx: PrecisionContext = FLOAT) -> MeixnerBasis:
    if not 0 < q < 1:
        raise DomainError("q must lie in (0, 1)")
    if D < 0:
        raise DomainError("degree cap must be a natural number")
    if ctx.mode == "exact":
        return _build_exact(Fraction(q), D, ctx.precision_bits, ctx.truncation_eps)
    return _build_cached(float(q), D, ctx.mode, ctx.precision_bits, ctx.truncation_eps)


@lru_cache(maxsize=64)
def _build_cached(q: float, D: int, mode: str, bits: int, eps: float) -> MeixnerBasis:
    X = support_size(q, D, max(eps, 1e-300))
    if mode == "extended":
        b, a, vecs = _lanczos_mp(q, D, X, bits)
    else:
        b, a, vecs = _lanczos_float(q, D, X)
    return _finish(q, D, b, a, X, mode, vecs)


def _finish(q, D, b, a, X, mode, vecs, exact_b=(), exact_a=()) -> MeixnerBasis:
    a = np.asarray(a, dtype=float)
    kappa = np.empty(D + 1)
    kappa[0] = 1.0
    for n in range(1, D + 1):
        kappa[n] = kappa[n - 1] / math.sqrt(a[n])
    residual = float(np.max(np.abs(vecs @ vecs.T - np.eye(D + 1))))
    if residual > 1e-8:
        raise PrecisionInsufficient(
            f"orthonormality residual {residual:.2e} at q={q}, D={D}; raise precision_bits")
    return MeixnerBasis(float(q), D, np.asarray(b, dtype=float), a, kappa, residual, X, mode,
                        vecs, exact_b, exact_a)


def _lanczos_float(q: float, D: int, X: int):
    x = np.arange(X + 1, dtype=float)
    vecs = np.zeros((D + 1, X + 1))
    vecs[0] = np.exp(0.5 * (math.log1p(-q) + x * math.log(q)))
    vecs[0] /= np.linalg.norm(vecs[0])
    b = np.zeros(D + 1)
    a = np.zeros(D + 1)
    for n in range(D):
        b[n] = float(np.dot(x * vecs[n], vecs[n]))
        r = (x - b[n]) * vecs[n]
        if n > 0:
            r -= math.sqrt(a[n]) * vecs[n - 1]
        for _ in range(2):  # full reorthogonalization, twice is enough
            r -= vecs[: n + 1].T @ (vecs[: n + 1] @ r)
        norm = float(np.linalg.norm(r))
        a[n + 1] = norm * norm
        vecs[n + 1] = r / norm
    b[D] = float(np.dot(x * vecs[D], vecs[D]))
    return b, a, vecs


def _mp(bits: int):
    import mpmath

    mp = mpmath.MPContext()
    mp.prec = bits
    return mp


def _lanczos_mp(q: float, D: int, X: int, bits: int):
    mp = _mp(bits)
    qq = mp.mpf(q)
    xs = [mp.mpf(i) for i in range(X + 1)]
    psi = [mp.sqrt((1 - qq) * qq**i) for i in range(X + 1)]
    nrm = mp.sqrt(mp.fsum(v * v for v in psi))
    vecs = [[v / nrm for v in psi]]
    b = [mp.mpf(0)] * (D + 1)
    a = [mp.mpf(0)] * (D + 1)
    for n in range(D):
        cur = vecs[n]
        b[n] = mp.fsum(xi * v * v for xi, v in zip(xs, cur))
        r = [(xi - b[n]) * v for xi, v in zip(xs, cur)]
        if n > 0:
            sa = mp.sqrt(a[n])
            r = [ri - sa * pv for ri, pv in zip(r, vecs[n - 1])]
        for vec in vecs:
            c = mp.fsum(ri * vi for ri, vi in zip(r, vec))
            r = [ri - c * vi for ri, vi in zip(r, vec)]
        a[n + 1] = mp.fsum(ri * ri for ri in r)
        nrm = mp.sqrt(a[n + 1])
        vecs.append([ri / nrm for ri in r])
    b[D] = mp.fsum(xi * v * v for xi, v in zip(xs, vecs[D]))
    arr = np.array([[float(v) for v in row] for row in vecs])
    return [float(v) for v in b], [float(v) for v in a], arr


def _build_exact(q: Fraction, D: int, bits: int, eps: float) -> MeixnerBasis:
    """Stieltjes on exact Geo(q) moments: every inner product is rational."""
    m = geo_moments(q, 2 * D + 3)
    pis = [[Fraction(1)]]
    h = [_moment_inner(pis[0], pis[0], m)]
    b, a = [], [Fraction(0)]
    for n in range(D + 1):
        xp = [Fraction(0)] + pis[n]
        b.append(_moment_inner(xp, pis[n], m) / h[n])
        if n == D:
            break
        nxt = [xp[i] - b[n] * (pis[n][i] if i < len(pis[n]) else 0) for i in range(len(xp))]
        if n > 0:
            prev = pis[n - 1]
            nxt = [c - a[n] * (prev[i] if i < len(prev) else 0) for i, c in enumerate(nxt)]
        pis.append(nxt)
        h.append(_moment_inner(nxt, nxt, m))
        a.append(h[n + 1] / h[n])
    X = support_size(float(q), D, max(eps, 1e-300))
    psi, _ = _recurrence_mp(q, b, a, np.arange(X + 1), D, max(bits, CD_MIN_BITS), False, True)
    return _finish(q, D, [float(v) for v in b], [float(v) for v in a], X, "exact", psi,
                   tuple(b), tuple(a))


def _monic_polys(b, a, n: int) -> list:
    """Coefficient lists of pi_0..pi_n from the recurrence."""
    pis = [[Fraction(1)]]
    for k in range(n):
        xp = [Fraction(0)] + pis[k]
        nxt = [xp[r] - b[k] * (pis[k][r] if r < len(pis[k]) else 0) for r in range(len(xp))]
        if k > 0:
            nxt = [c - a[k] * (pis[k - 1][r] if r < len(pis[k - 1]) else 0) for r, c in enumerate(nxt)]
        pis.append(nxt)
    return pis


def _moment_inner(p, r, m) -> Fraction:
    return sum(c1 * c2 * m[i + j] for i, c1 in enumerate(p) for j, c2 in enumerate(r))


def exact_orthogonality(basis: MeixnerBasis) -> bool:
    """Exact check <pi_i, pi_j> = delta_ij h_i of the rational recurrence against Geo moments."""
    b, a = basis.exact_b, basis.exact_a
    if not b:
        raise DomainError("needs an exactly built basis")
    D = len(b) - 1
    m = geo_moments(_q_of(b), 2 * D + 2)
    pis = _monic_polys(b, a, D)
    h = Fraction(1)
    for i in range(D + 1):
        if i > 0:
            h *= a[i]
        if _moment_inner(pis[i], pis[i], m) != h:
            return False
        if any(_moment_inner(pis[i], pis[j], m) != 0 for j in range(i)):
            return False
    return True


def _q_of(b) -> Fraction:
    return b[0] / (1 + b[0])  # b_0 = q / (1 - q)


def exact_inner_product(basis: MeixnerBasis, i: int, j: int):
    """<M_i, M_j> in rational arithmetic; rational whenever it is 0 or i == j."""
    b, a = basis.exact_b, basis.exact_a
    if not b:
        raise DomainError("exact inner products need an exactly built basis")
    m = geo_moments(_q_of(b), i + j + 2)
    pis = _monic_polys(b, a, max(i, j))
    val = _moment_inner(pis[i], pis[j], m)
    h_i = math.prod(a[1: i + 1], start=Fraction(1))
    h_j = math.prod(a[1: j + 1], start=Fraction(1))
    if val == 0 or i == j:
        return val / h_i
    return float(val) / math.sqrt(float(h_i * h_j))


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def _recurrence_mp(q, b, a, xs, n: int, bits: int, derivative: bool, weighted: bool):
    """M_l(x) (times sqrt(w(x)) if ``weighted``) and optionally M_l'(x), l = 0..n, in mpmath."""
    mp = _mp(bits)

    def conv(v):
        return mp.mpf(v.numerator) / v.denominator if isinstance(v, Fraction) else mp.mpf(v)

    qq = conv(q)
    bb = [conv(v) for v in b[: n + 1]]
    sa = [mp.sqrt(conv(v)) for v in a[: n + 1]]
    xs = list(xs)
    psi = np.zeros((n + 1, len(xs)))
    phi = np.zeros((n + 1, len(xs))) if derivative else None
    for col, xi in enumerate(xs):
        x = mp.mpf(int(xi))
        p0 = mp.sqrt((1 - qq) * qq**x) if weighted else mp.mpf(1)
        pm = mp.mpf(0)
        d0, dm = mp.mpf(0), mp.mpf(0)
        psi[0, col] = float(p0)
        for k in range(n):
            p1 = (x - bb[k]) * p0 - (sa[k] * pm if k else 0)
            if derivative:
                d1 = (p0 + (x - bb[k]) * d0 - (sa[k] * dm if k else 0)) / sa[k + 1]
                dm, d0 = d0, d1
                phi[k + 1, col] = float(d1)
            p1 = p1 / sa[k + 1]
            pm, p0 = p0, p1
            psi[k + 1, col] = float(p1)
    return psi, phi


def recurrence_functions(basis: MeixnerBasis, x, n: int, derivative: bool = False,
                         weighted: bool = True, ctx: PrecisionContext = FLOAT):
    """M_l(x) (weighted by sqrt(w) by default), l = 0..n, from the recurrence.

    Runs in extended precision with at least CD_MIN_BITS bits regardless of
    ``ctx``; the forward recurrence is not stable in doubles.
    """
    if n > basis.D:
        raise DomainError(f"degree {n} exceeds basis cap {basis.D}")
    bits = max(ctx.precision_bits, CD_MIN_BITS)
    if basis.exact_b:
        b, a, q = basis.exact_b, basis.exact_a, _q_of(basis.exact_b)
    else:
        # closed-form coefficients at full precision: the forward recurrence
        # amplifies the rounding in the orthogonalized ones near x = 0
        q = basis.q
        mp = _mp(bits)
        b, a = zip(*(closed_form_recurrence(mp.mpf(q), k) for k in range(n + 1)))
    psi, phi = _recurrence_mp(q, b, a, np.atleast_1d(x), n, bits, derivative, weighted)
    return (psi, phi) if derivative else psi


def weighted_functions(basis: MeixnerBasis, x, n: int) -> np.ndarray:
    """psi_l(x), l = 0..n, at lattice points, read from the orthogonalized vectors."""
    if n > basis.D:
        raise DomainError(f"degree {n} exceeds basis cap {basis.D}")
    x = np.asarray(x, dtype=np.int64)
    out = np.zeros((n + 1,) + x.shape)
    inside = (x >= 0) & (x <= basis.support_max)
    out[:, inside] = basis.vectors[: n + 1, x[inside]]
    return out


def kernel(basis: MeixnerBasis, N: int, x: int, y: int, ctx: PrecisionContext = FLOAT) -> float:
    """Christoffel-Darboux kernel sum_{l<N} M_l(x) M_l(y) (unweighted)."""
    _check_N(basis, N)
    sa = basis.sqrt_a[N]
    if x != y:
        m = recurrence_functions(basis, [x, y], N, weighted=False, ctx=ctx)
        return float(sa * (m[N, 0] * m[N - 1, 1] - m[N - 1, 0] * m[N, 1]) / (x - y))
    m, d = recurrence_functions(basis, [x], N, derivative=True, weighted=False, ctx=ctx)
    return float(sa * (d[N, 0] * m[N - 1, 0] - d[N - 1, 0] * m[N, 0]))


def kernel_diagonal_sum(basis: MeixnerBasis, N: int, x: int, ctx: PrecisionContext = FLOAT) -> float:
    """sum_{l<N} M_l(x)^2 from the recurrence."""
    m = recurrence_functions(basis, [x], N - 1, weighted=False, ctx=ctx)
    return float(np.sum(m[:, 0] ** 2))


# ---------------------------------------------------------------------------
# Gram matrices, gap probabilities, nu
# ---------------------------------------------------------------------------

def _check_N(basis: MeixnerBasis, N: int):
    if not 1 <= N <= basis.D:
        raise DomainError(f"need 1 <= N <= D={basis.D}, got N={N}")


def gram_matrix_Kt(basis: MeixnerBasis, N: int, t: int, ctx: PrecisionContext = FLOAT) -> np.ndarray:
    """Gram matrix of M_0..M_{N-1} over {t, t+1, ...}; mass beyond the support is below eps."""
    _check_N(basis, N)
    psi = basis.vectors[:N, max(t, 0):]
    return psi @ psi.T


def complement_gram(basis: MeixnerBasis, N: int, t: int) -> np.ndarray:
    """Gram matrix over {0..t-1}; equals I - K^t by orthonormality."""
    _check_N(basis, N)
    psi = basis.vectors[:N, : max(t, 0)]
    return psi @ psi.T


def gap_probability(basis: MeixnerBasis, N: int, t: int, ctx: PrecisionContext = FLOAT) -> float:
    """det(I - K^t) = P(lambda_1 <= t - 1)."""
    if t <= 0:
        return 0.0
    det = float(np.linalg.det(complement_gram(basis, N, t)))
    if det < -1e-8 or det > 1 + 1e-8:
        raise ArithmeticError(f"gap probability {det} outside [0, 1]")
    return min(max(det, 0.0), 1.0)


def top_particle_cdf(basis: MeixnerBasis, N: int, s_max: int) -> np.ndarray:
    """P(lambda_1 <= s) for s = 0..s_max."""
    return np.array([gap_probability(basis, N, s + 1) for s in range(s_max + 1)])


def widom_bound(basis: MeixnerBasis, N: int, t: int, ctx: PrecisionContext = FLOAT) -> tuple:
    det = gap_probability(basis, N, t, ctx)
    return det, math.exp(-float(np.trace(gram_matrix_Kt(basis, N, t, ctx))))


@dataclass(frozen=True)
class NuMeasure:
    q: float
    N: int
    densities: np.ndarray  # on 0..len-1
    tail_bound: float

    @property
    def x_max(self) -> int:
        return self.densities.size - 1

    def tail(self, t) -> float:
        """nu([t, inf)), including the certified remainder bound."""
        t = math.ceil(t)
        if t > self.x_max:
            return self.tail_bound
        return float(math.fsum(self.densities[max(t, 0):])) + self.tail_bound

    def expect(self, f) -> float:
        x = np.arange(self.densities.size, dtype=float)
        return float(math.fsum(f(x) * self.densities))


def _root_bound(basis: MeixnerBasis, N: int) -> float:
    """Gershgorin bound on the zeros of M_0..M_{N-1}."""
    sa = basis.sqrt_a
    return max(basis.b[n] + (sa[n] if n > 0 else 0) + (sa[n + 1] if n + 1 < N else 0)
               for n in range(N))


def nu_measure(basis: MeixnerBasis, N: int, ctx: PrecisionContext = FLOAT,
               route: str = "sum") -> NuMeasure:
    """Expected empirical law K_N(x, x) w(x) / N on the support, with a tail certificate.

    ``route="sum"`` adds psi_l(x)^2 from the stored vectors; ``route="cd"``
    uses the differentiated Christoffel-Darboux formula evaluated by the
    extended-precision recurrence.

    Beyond every zero r of M_0..M_{N-1}, each term's ratio between x+1 and x
    is at most q ((x + 1 - r)/(x - r))^{2(N-1)}, which bounds the remainder
    by a geometric series.
    """
    _check_N(basis, N)
    X = basis.support_max
    if route == "sum":
        dens = np.sum(basis.vectors[:N] ** 2, axis=0) / N
    elif route == "cd":
        psi, phi = recurrence_functions(basis, np.arange(X + 1), N, derivative=True, ctx=ctx)
        dens = basis.sqrt_a[N] * (phi[N] * psi[N - 1] - phi[N - 1] * psi[N]) / N
        dens = np.maximum(dens, 0.0)
    else:
        raise ValueError(f"unknown route {route!r}")
    r = _root_bound(basis, N)
    rho = basis.q * ((X + 1 - r) / (X - r)) ** (2 * (N - 1)) if X > r + 1 else 1.0
    if rho >= 1:
        raise DomainError("support too short for a tail certificate")
    return NuMeasure(basis.q, N, dens, float(dens[-1] * rho / (1 - rho)))


def trace_identity_check(basis: MeixnerBasis, N: int, t: int, ctx: PrecisionContext = FLOAT,
                         nu: NuMeasure | None = None) -> float:
    """|Tr K^t - N nu([t, inf))|: Gram trace against the Christoffel-Darboux diagonal."""
    nu = nu or nu_measure(basis, N, ctx, route="cd")
    tr = float(np.trace(gram_matrix_Kt(basis, N, t, ctx)))
    return abs(tr - N * nu.tail(t))


# ---------------------------------------------------------------------------
# factorial and polynomial moments
# ---------------------------------------------------------------------------

def _falling_ratio(top: int, bottom: int) -> int:
    """top! / bottom! with the convention 0 when bottom < 0."""
    if bottom < 0:
        return 0
    return math.prod(range(bottom + 1, top + 1))


def _as_rational(q) -> Fraction:
    return q if isinstance(q, Fraction) else Fraction(q)


def factorial_moment(q, k: int, N: int, ctx: PrecisionContext = PrecisionContext("exact")):
    """E[(X)_k] for X ~ nu_{q,N} by the closed single-sum formula."""
    if k < 0 or N < 1:
        raise DomainError("need k >= 0 and N >= 1")
    if ctx.mode != "exact":
        if k > 40:
            raise DomainError("float factorial moments limited to k <= 40")
        return float(factorial_moment(q, k, N))
    q = _as_rational(q)
    s = sum(q ** (-i) * math.comb(k, i) ** 2 * _falling_ratio(N + k - i, N - i - 1)
            for i in range(k + 1))
    return (q / (1 - q)) ** k * s / (N * (k + 1))


def factorial_moment_double_sum(q, k: int, N: int) -> Fraction:
    """The double-sum form of E[(X)_k], normalized per particle (divided by N)."""
    q = _as_rational(q)
    s = Fraction(0)
    for i in range(k + 1):
        inner = sum(_falling_ratio(l + k - i, l - i) for l in range(i, N))
        s += q ** (-i) * math.comb(k, i) ** 2 * inner
    return (q / (1 - q)) ** k * s / N


def factorial_moment_from_nu(nu: NuMeasure, k: int) -> float:
    def falling(x):
        out = np.ones_like(x)
        for j in range(k):
            out = out * (x - j)
        return out

    return nu.expect(falling)


def stirling2_row(k: int) -> list:
    """S(k, j) for j = 0..k."""
    row = [1]
    for n in range(1, k + 1):
        new = [0] * (n + 1)
        for j in range(1, n + 1):
            new[j] = j * (row[j] if j < len(row) else 0) + row[j - 1]
        row = new
    return row


def polynomial_moment_exact(q, N: int, k: int) -> Fraction:
    """E[X^k] = sum_j S(k, j) E[(X)_j], exact."""
    return sum(s * factorial_moment(q, j, N) for j, s in enumerate(stirling2_row(k)) if s)


def polynomial_moment(basis: MeixnerBasis, N: int, k: int, ctx: PrecisionContext = FLOAT,
                      nu: NuMeasure | None = None) -> float:
    """E[X^k] summed against the nu density (float route)."""
    nu = nu or nu_measure(basis, N, ctx)
    return nu.expect(lambda x: x**k)


def partial_moment(nu: NuMeasure, k: int, R: float, above: bool = True) -> float:
    """E[X^k 1_{X >= R}] (or 1_{X <= R} when ``above`` is False)."""
    x = np.arange(nu.densities.size, dtype=float)
    mask = x >= R if above else x <= R
    return float(math.fsum((x[mask] ** k) * nu.densities[mask]))
