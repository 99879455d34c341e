"""Single-trajectory sampling.

The walk's law is generated from the collapsed one-step rule

    P(X_{n+1} = +1 | S_n = s) = alpha (n + s) / (2n) + (1 - alpha)(1 + eps_n) / 2,

so a trajectory carries only ``(n, S_n)``; the history is never stored.

Randomness: trajectory ``index`` under master seed ``seed`` draws from
``PCG64DXSM(SeedSequence(seed, spawn_key=(index,)))``. Every step consumes
one 64-bit output converted to a 53-bit uniform exactly as
``Generator.random`` does, so the compiled path and the scalar functions
below agree draw for draw.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba as nb
import numpy as np

from .model import ParameterError, WalkParams

CHUNK = 1 << 16
_MAX_SEED = 1 << 64


def _check_seed(seed) -> int:
    if isinstance(seed, bool) or int(seed) != seed or not 0 <= seed < _MAX_SEED:
        raise ParameterError(f"seed must be an integer in [0, 2^64), got {seed!r}")
    return int(seed)


def trajectory_bitgen(seed: int, index: int = 0) -> np.random.PCG64DXSM:
    """Bit generator for trajectory ``index`` of master seed ``seed``."""
    ss = np.random.SeedSequence(_check_seed(seed), spawn_key=(int(index),))
    return np.random.PCG64DXSM(ss)


def trajectory_rng(seed: int, index: int = 0) -> np.random.Generator:
    return np.random.Generator(trajectory_bitgen(seed, index))


def _check_reachable(n: int, s: int) -> None:
    if n < 1 or abs(s) > n or (n + s) % 2:
        raise ParameterError(f"S_n = {s} is not reachable at n = {n}")


def conditional_step_probability(params: WalkParams, n: int, s: int) -> float:
    """``P(X_{n+1} = +1 | S_n = s)``."""
    _check_reachable(n, s)
    half = 0.5 * params.alpha
    p = (half + 0.5 * (1.0 - params.alpha) * (1.0 + params.schedule.at(n))) + (half / n) * s
    return min(max(p, 0.0), 1.0)


def sample_first_step(params: WalkParams, rng: np.random.Generator) -> int:
    return 1 if rng.random() < params.q else -1


def next_step(params: WalkParams, n: int, s: int, rng: np.random.Generator) -> int:
    return 1 if rng.random() < conditional_step_probability(params, n, s) else -1


# ----------------------------------------------------------------------------
# compiled stepping
# ----------------------------------------------------------------------------

_TO_UNIT = 1.0 / 9007199254740992.0


@nb.njit(cache=True, nogil=True)
def _advance(raw, n, s, alpha, eps, ckpts, ci, out):
    # consume raw[j] for the steps n -> n+1; record S at checkpoint times
    half = 0.5 * alpha
    c1 = 0.5 * (1.0 - alpha)
    nck = ckpts.shape[0]
    sf = float(s)
    nxt = ckpts[ci] if ci < nck else -1
    for j in range(raw.shape[0]):
        u = (raw[j] >> np.uint64(11)) * _TO_UNIT
        p = (half + c1 * (1.0 + eps[n])) + (half / n) * sf
        sf += 1.0 if u < p else -1.0
        n += 1
        if n == nxt:
            out[ci] = int(sf)
            ci += 1
            nxt = ckpts[ci] if ci < nck else -1
    return n, int(sf), ci


def _first_step(raw0, q):
    return 1 if (int(raw0) >> 11) * _TO_UNIT < q else -1


def run_stream(params: WalkParams, eps: np.ndarray, n_max: int, ckpts: np.ndarray, bitgen) -> np.ndarray:
    """Positions at ``ckpts`` (sorted, unique, within ``[1, n_max]``) for one stream."""
    out = np.empty(ckpts.shape[0], dtype=np.int64)
    raw = bitgen.random_raw(min(CHUNK, n_max))
    s = _first_step(raw[0], params.q)
    n = 1
    ci = 0
    if ckpts[0] == 1:
        out[0] = s
        ci = 1
    n, s, ci = _advance(raw[1:], n, s, params.alpha, eps, ckpts, ci, out)
    while n < n_max:
        raw = bitgen.random_raw(min(CHUNK, n_max - n))
        n, s, ci = _advance(raw, n, s, params.alpha, eps, ckpts, ci, out)
    return out


def normalize_checkpoints(checkpoints, n_max: int) -> np.ndarray:
    ck = np.unique(np.asarray(checkpoints, dtype=np.int64))
    if ck.size == 0:
        raise ParameterError("checkpoint list is empty")
    if ck[0] < 1 or ck[-1] > n_max:
        raise ParameterError(f"checkpoints must lie in [1, {n_max}]")
    return ck


@dataclass(frozen=True)
class Trajectory:
    params: WalkParams
    seed: int
    index: int
    checkpoints: np.ndarray
    positions: np.ndarray

    def __post_init__(self):
        n, s = self.checkpoints, self.positions
        if np.any(np.abs(s) > n) or np.any((n + s) % 2):
            raise AssertionError("trajectory violates parity/range invariants")


def simulate(params: WalkParams, n_max: int, checkpoints, seed: int, index: int = 0) -> Trajectory:
    """Run one walk to ``n_max`` and record ``S_n`` at ``checkpoints``."""
    if int(n_max) != n_max or n_max < 1:
        raise ParameterError("n_max must be a positive integer")
    n_max = int(n_max)
    ck = normalize_checkpoints(checkpoints, n_max)
    eps = params.schedule.table(n_max)
    pos = run_stream(params, eps, int(ck[-1]), ck, trajectory_bitgen(seed, index))
    return Trajectory(params, _check_seed(seed), int(index), ck, pos)


def simulate_batch(params: WalkParams, n_max: int, m: int, rng: np.random.Generator) -> np.ndarray:
    """``m`` independent walks from one generator, vectorized over walks.

    Returns an ``(m, n_max)`` array with ``S_1, ..., S_{n_max}``. Intended
    for short walks with many replicates (distribution tests).
    """
    half = 0.5 * params.alpha
    c1 = 0.5 * (1.0 - params.alpha)
    eps = params.schedule.table(n_max)
    path = np.empty((m, n_max), dtype=np.int64)
    s = np.where(rng.random(m) < params.q, 1, -1)
    path[:, 0] = s
    for n in range(1, n_max):
        p = (half + c1 * (1.0 + eps[n])) + (half / n) * s
        s = s + np.where(rng.random(m) < p, 1, -1)
        path[:, n] = s
    return path
