"""Discrete-time q-pushTASEP with step initial condition ``x_k(0) = k``.

At each time step particles update left to right.  Particle k first makes a
q-Geo(u^2) jump, then is pushed by part of the distance its left neighbour
just travelled.  The push law is the q-deformed beta binomial with base 1/q,
xi = q^gap, eta = 0, where gap counts the empty sites between the two
particles before the update (see ``GAP_CONVENTIONS``).
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .qspecial import FLOAT, PrecisionContext, QParams, f_q, log_base, q_digamma_second
from .sampling import QDBBParams, RngStream, qdbb_sample, qgeo_sample, qgeo_table

# "holes": gap = x_k - x_{k-1} - 1 (empty sites); keeps strict order and
# reproduces the q-Whittaker top-row law.  "distance": gap = x_k - x_{k-1},
# kept only to demonstrate that it lets particles collide.
GAP_CONVENTIONS = {"holes": 0, "distance": 1}


class ModelConsistencyError(RuntimeError):
    """Strict ordering x_1 < ... < x_N broke during an update."""


@dataclass
class TrajectoryRecord:
    jumps: list = field(default_factory=list)
    pushes: list = field(default_factory=list)
    gaps: list = field(default_factory=list)


@dataclass
class ParticleConfig:
    positions: np.ndarray
    time: int
    params: QParams
    record: TrajectoryRecord | None = None

    @property
    def N(self) -> int:
        return len(self.positions)

    @classmethod
    def step_initial(cls, N: int, params: QParams, record: bool = False) -> "ParticleConfig":
        return cls(np.arange(1, N + 1, dtype=np.int64), 0, params,
                   TrajectoryRecord() if record else None)

    def check_order(self):
        if np.any(np.diff(self.positions) <= 0):
            raise ModelConsistencyError(f"order broken at time {self.time}: {self.positions}")


def step(config: ParticleConfig, rng: RngStream, gap_convention: str = "holes") -> ParticleConfig:
    """One left-to-right sweep, drawing variables one at a time (reference path)."""
    q, u = config.params
    offset = GAP_CONVENTIONS[gap_convention]
    old = config.positions
    new = old.copy()
    jumps, pushes, gaps = [], [], []
    for k in range(config.N):
        jump = qgeo_sample(u * u, q, rng)
        push = 0
        gap = None
        if k > 0:
            gap = int(old[k] - old[k - 1] - 1 + offset)
            moved = int(new[k - 1] - old[k - 1])
            if moved > 0:
                push = qdbb_sample(QDBBParams.push(q, gap, moved), rng)
        new[k] = old[k] + jump + push
        jumps.append(jump)
        pushes.append(push)
        gaps.append(gap)
    rec = config.record
    if rec is not None:
        rec.jumps.append(jumps)
        rec.pushes.append(pushes)
        rec.gaps.append(gaps)
    out = ParticleConfig(new, config.time + 1, config.params, rec)
    out.check_order()
    return out


def run(N: int, T: int, params: QParams, rng: RngStream,
        gap_convention: str = "holes", record: bool = False) -> ParticleConfig:
    config = ParticleConfig.step_initial(N, params, record)
    for _ in range(T):
        config = step(config, rng, gap_convention)
    return config


def run_fast(N: int, T: int, params: QParams, rng: RngStream,
             gap_convention: str = "holes") -> np.ndarray:
    """Final positions after T steps using the compiled kernel."""
    q, u = params
    x = np.arange(1, N + 1, dtype=np.int64)
    if T == 0:
        return x
    cdf = qgeo_table(float(u * u), float(q)).cdf
    uj = rng.generator.random((T, N))
    up = rng.generator.random((T, N))
    bad = _kernels.pushtasep_evolve(x, float(q), cdf, GAP_CONVENTIONS[gap_convention], uj, up, 0)
    if bad != _kernels.OK:
        raise ModelConsistencyError(f"order broken at step {bad} (gap convention {gap_convention!r})")
    return x


def sample_positions(N: int, T: int, params: QParams, samples: int, seed: int,
                     stream_base: int = 0, threads: int = 1,
                     gap_convention: str = "holes") -> np.ndarray:
    """``samples`` independent final configurations, shape (samples, N).

    Sample i always uses stream ``stream_base + i``, so the output does not
    depend on ``threads``.
    """
    out = np.empty((samples, N), dtype=np.int64)

    def work(i):
        out[i] = run_fast(N, T, params, RngStream(seed, stream_base + i), gap_convention)

    if threads <= 1:
        for i in range(samples):
            work(i)
    else:
        with ThreadPoolExecutor(threads) as pool:
            list(pool.map(work, range(samples)))
    return out


def scaling_denominator(N: int, params: QParams, ctx: PrecisionContext = FLOAT) -> float:
    q, u = params
    second = float(q_digamma_second(log_base(u, q), q, ctx))
    return (-second) ** (1 / 3) / math.log(1 / q) * N ** (1 / 3)


def scaled_observable(x_NN, N: int, params: QParams, ctx: PrecisionContext = FLOAT):
    """Centre by the LLN speed and divide by the N^{1/3} fluctuation scale."""
    q, u = params
    denom = scaling_denominator(N, params, ctx)
    if not denom > 0:
        raise ValueError("fluctuation scale must be positive")
    return (np.asarray(x_NN, dtype=float) - float(f_q(q, u, ctx)) * N) / denom
