"""Geometric last-passage percolation: squares, RSK, and the periodic strip.

The strip environment is stored as copies ``k = 0..K`` of an N x T grid.  In
lifted lattice coordinates (0-based) cell (x, y) carries the weight
``copies[x // N + y // T][x % N, y % T]``; moving N down and T left lands on
the same cylinder cell.  Copy k has i.i.d. Geo(u^2 q^k) weights, so copies
beyond K are zero except on an event of probability at most
``N T u^2 q^(K+1) / (1 - q)``.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .qspecial import mu_q
from .sampling import RngStream, geo_sample
from .stats import chunked_streams, wilson_interval


@dataclass(frozen=True)
class SquareEnvironment:
    weights: np.ndarray
    z: float

    @property
    def N(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True)
class CylinderEnvironment:
    N: int
    T: int
    copies: np.ndarray  # shape (K + 1, N, T)
    u: float
    q: float
    truncation_prob_bound: float

    @property
    def K(self) -> int:
        return self.copies.shape[0] - 1

    def last_nonzero_copy(self) -> int:
        nz = np.flatnonzero(self.copies.reshape(self.copies.shape[0], -1).any(axis=1))
        return int(nz[-1]) if nz.size else -1


def square_lpp(env) -> int:
    w = env.weights if isinstance(env, SquareEnvironment) else np.asarray(env)
    return int(_kernels.square_lpp(np.ascontiguousarray(w, dtype=np.int64)))


def rsk_shape(matrix) -> tuple:
    """Shape of the RSK image of a nonnegative integer matrix (row insertion)."""
    a = np.asarray(matrix, dtype=np.int64)
    rows: list[list[int]] = []
    for i in range(a.shape[0]):
        for j in range(a.shape[1]):
            for _ in range(int(a[i, j])):
                val = j
                for row in rows:
                    pos = bisect.bisect_right(row, val)
                    if pos == len(row):
                        row.append(val)
                        break
                    row[pos], val = val, row[pos]
                else:
                    rows.append([val])
    return tuple(len(r) for r in rows)


def sample_square(N: int, z: float, rng: RngStream, M: int | None = None) -> SquareEnvironment:
    return SquareEnvironment(geo_sample(z, rng, (N, M or N)), z)


def truncation_depth(N: int, T: int, u: float, q: float, eps: float = 1e-9) -> int:
    """Least K with N T u^2 q^(K+1) / (1 - q) < eps."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    lead = N * T * u * u / (1 - q)
    if lead == 0:
        return 0
    k = max(0, math.floor(math.log(eps / lead) / math.log(q)) - 2)
    while lead * q ** (k + 1) >= eps:
        k += 1
    return k


def _copy_params(K: int, u: float, q: float) -> np.ndarray:
    return u * u * q ** np.arange(K + 1)


def sample_cylinder(N: int, T: int, u: float, q: float, eps: float, rng: RngStream) -> CylinderEnvironment:
    K = truncation_depth(N, T, u, q, eps)
    return CylinderEnvironment(N, T, _geo_copies(K, N, T, u, q, rng, ()), u, q,
                               N * T * u * u * q ** (K + 1) / (1 - q))


def _geo_copies(K, N, T, u, q, rng, batch: tuple) -> np.ndarray:
    z = _copy_params(K, u, q)
    if u == 0:
        return np.zeros(batch + (K + 1, N, T), dtype=np.int64)
    unif = rng.uniform(batch + (K + 1, N, T))
    logz = np.log(z).reshape((K + 1, 1, 1))
    return np.floor(np.log(unif) / logz).astype(np.int64)


def cylinder_lpp(env: CylinderEnvironment) -> int:
    return int(_kernels.cylinder_lpp(env.copies, env.last_nonzero_copy()))


def diagonal_decomposition_bound(env: CylinderEnvironment) -> tuple:
    """(sum of square LPP values of the diagonal blocks, L); the first never exceeds L."""
    k_last = env.last_nonzero_copy()
    lower = int(_kernels.diagonal_lower(env.copies, k_last)) if k_last >= 0 else 0
    return lower, cylinder_lpp(env)


def cylinder_samples(N: int, T: int, u: float, q: float, samples: int, seed: int,
                     stream_base: int = 0, eps: float = 1e-9, chunk: int = 4096,
                     with_lower: bool = False):
    """L (and optionally the diagonal lower bound) for many independent environments."""
    K = truncation_depth(N, T, u, q, eps)
    chunk = max(1, min(chunk, 2_000_000 // ((K + 1) * N * T) + 1))
    L = np.empty(samples, dtype=np.int64)
    low = np.empty(samples, dtype=np.int64) if with_lower else None
    for rng, start, count in chunked_streams(seed, stream_base, samples, chunk):
        batch = _geo_copies(K, N, T, u, q, rng, (count,))
        for b in range(count):
            copies = batch[b]
            nz = np.flatnonzero(copies.reshape(K + 1, -1).any(axis=1))
            k_last = int(nz[-1]) if nz.size else -1
            L[start + b] = _kernels.cylinder_lpp(copies, k_last)
            if with_lower:
                low[start + b] = _kernels.diagonal_lower(copies, k_last) if k_last >= 0 else 0
    return (L, low) if with_lower else L


def square_lpp_samples(N: int, z: float, samples: int, seed: int, stream_base: int = 0,
                       chunk: int | None = None) -> np.ndarray:
    """Square LPP values with i.i.d. Geo(z) weights, deterministic in (seed, stream_base)."""
    chunk = chunk or max(1, 4_000_000 // (N * N))
    out = np.empty(samples, dtype=np.int64)
    log_z = math.log(z)
    for rng, start, count in chunked_streams(seed, stream_base, samples, chunk):
        unif = rng.uniform((count, N, N))
        _kernels.square_lpp_geo_batch(unif, log_z, out[start:start + count])
    return out


@dataclass
class LowerTailReport:
    N: int
    q: float
    x_grid: list
    thresholds: list
    counts: list
    samples: int
    estimates: list
    intervals: list
    c_hat: float
    monotone: bool

    @property
    def positive_constant(self) -> bool:
        return self.c_hat > 0


def lower_tail_threshold(N: int, q: float, x: float) -> float:
    return (mu_q(q) - 1) * N - x * q ** (1 / 6) / (1 - q) * N ** (1 / 3)


def uniform_lower_tail_check(N: int, q: float, x_grid, samples: int, seed: int,
                             stream_base: int = 0, confidence: float = 0.99,
                             values: np.ndarray | None = None) -> LowerTailReport:
    """Monte Carlo lower tail of the N x N Geo(q) LPP value on the x_grid.

    ``c_hat`` is the largest c with exp(-c x^{3/2}) above every upper
    confidence limit, so it is positive exactly when every tail probability
    is bounded away from 1.
    """
    T_N = values if values is not None else square_lpp_samples(N, q, samples, seed, stream_base)
    thresholds, counts, est, cis = [], [], [], []
    for x in x_grid:
        thr = lower_tail_threshold(N, q, x)
        c = int(np.count_nonzero(T_N <= thr))
        thresholds.append(thr)
        counts.append(c)
        est.append(c / T_N.size)
        cis.append(wilson_interval(c, T_N.size, confidence))
    c_hat = min(-math.log(hi) / x**1.5 for x, (_, hi) in zip(x_grid, cis) if x > 0)
    monotone = all(a >= b for a, b in zip(counts, counts[1:]))
    return LowerTailReport(N, q, list(x_grid), thresholds, counts, T_N.size, est, cis, c_hat, monotone)
