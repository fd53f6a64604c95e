"""numba kernels for the hot loops.  Randomness always comes in as uniforms."""
from __future__ import annotations

import math

import numpy as np
from numba import njit

OK = -1


@njit(cache=True, nogil=True)
def push_from_uniform(q, holes, m, u, buf):
    """Push amount for a particle with ``holes`` empty sites ahead of it when the
    particle behind moved ``m`` steps; ``buf`` is scratch of length >= min(m, holes) + 1."""
    r_max = min(m, holes)
    if r_max <= 0:
        return m
    lq = math.log(q)
    buf[0] = 0.0
    top = 0.0
    for r in range(r_max):
        v = (buf[r] + lq * (1 - (holes - r) - (m - r))
             + math.log1p(-q ** (holes - r)) + math.log1p(-q ** (m - r))
             - math.log1p(-q ** (r + 1)))
        buf[r + 1] = v
        if v > top:
            top = v
    total = 0.0
    for r in range(r_max + 1):
        buf[r] = math.exp(buf[r] - top)
        total += buf[r]
    target = u * total
    acc = 0.0
    for r in range(r_max + 1):
        acc += buf[r]
        if target < acc:
            return m - r
    return m - r_max


@njit(cache=True, nogil=True)
def pushtasep_evolve(x, q, jump_cdf, gap_offset, u_jump, u_push, t0):
    """Advance positions ``x`` in place by ``u_jump.shape[0]`` steps.

    Returns OK, or the index (t0-based step) at which strict order broke.
    """
    steps, n = u_jump.shape
    buf = np.empty(64)
    for t in range(steps):
        prev_old = 0
        prev_move = 0
        for k in range(n):
            old = x[k]
            j = np.searchsorted(jump_cdf, u_jump[t, k], side="right")
            p = 0
            if k > 0 and prev_move > 0:
                holes = old - prev_old - 1 + gap_offset
                need = min(prev_move, holes) + 1
                if need > buf.size:
                    buf = np.empty(2 * need)
                p = push_from_uniform(q, holes, prev_move, u_push[t, k], buf)
            x[k] = old + j + p
            if k > 0 and x[k] <= x[k - 1]:
                return t0 + t
            prev_old = old
            prev_move = x[k] - old
    return OK


@njit(cache=True, nogil=True)
def square_lpp(w):
    n, m = w.shape
    row = np.zeros(m, dtype=np.int64)
    for i in range(n):
        left = 0
        for j in range(m):
            best = row[j] if row[j] > left else left
            left = best + w[i, j]
            row[j] = left
    return row[m - 1]


@njit(cache=True, nogil=True)
def square_lpp_geo_batch(uniforms, log_z, out):
    """Fused Geo(z) sampling and square LPP for a batch of uniform grids."""
    s, n, m = uniforms.shape
    row = np.zeros(m, dtype=np.int64)
    for b in range(s):
        row[:] = 0
        for i in range(n):
            left = 0
            for j in range(m):
                w = np.int64(math.floor(math.log(uniforms[b, i, j]) / log_z))
                best = row[j] if row[j] > left else left
                left = best + w
                row[j] = left
        out[b] = row[m - 1]


@njit(cache=True, nogil=True)
def cylinder_lpp(copies, k_last):
    """Point-to-region LPP on the lifted quadrant, restricted to copies <= k_last.

    Copy index of lifted cell (x, y) (0-based) is x // N + y // T.
    """
    _, n, t = copies.shape
    if k_last < 0:
        return 0
    width = (k_last + 1) * t
    row = np.zeros(width, dtype=np.int64)
    best_all = 0
    for x in range((k_last + 1) * n):
        bx = x // n
        i = x - bx * n
        left = 0
        y_end = (k_last - bx + 1) * t
        for y in range(y_end):
            by = y // t
            prev = row[y] if row[y] > left else left
            left = prev + copies[bx + by, i, y - by * t]
            row[y] = left
            if left > best_all:
                best_all = left
    return best_all


@njit(cache=True, nogil=True)
def diagonal_lower(copies, k_max):
    total = 0
    for i in range(k_max // 2 + 1):
        total += square_lpp(copies[2 * i])
    return total
