"""Exact law of ``S_n`` for small ``n``.

Two independent routes: a dynamic program over the Markov state
``(n, S_n)`` and brute-force enumeration of all ``2^n`` sign paths. The
second exists only to validate the first.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ParameterError, WalkParams

MAX_PATH_STEPS = 20
MAX_PATH_PROBABILITY_STEPS = 25
MAX_DP_STEPS = 10_000


@dataclass(frozen=True)
class ExactDistribution:
    """``P(S_n = s)`` on ``support = -n, -n+2, ..., n``."""

    n: int
    support: np.ndarray
    probs: np.ndarray

    def moment(self, k: int) -> float:
        return float(np.dot(self.probs, self.support.astype(float) ** k))

    @property
    def mean(self) -> float:
        return self.moment(1)

    @property
    def second_moment(self) -> float:
        return self.moment(2)

    def prob(self, s: int) -> float:
        if abs(s) > self.n or (self.n + s) % 2:
            return 0.0
        return float(self.probs[(s + self.n) // 2])


def _step_probs(params: WalkParams, n: int, s: np.ndarray) -> np.ndarray:
    half = 0.5 * params.alpha
    p = (half + 0.5 * (1.0 - params.alpha) * (1.0 + params.schedule.at(n))) + (half / n) * s
    return np.clip(p, 0.0, 1.0)


def path_probability(params: WalkParams, signs) -> float:
    """Probability of observing the sign path ``X_1, ..., X_n``."""
    x = np.asarray(signs, dtype=np.int64)
    if x.ndim != 1 or not 1 <= x.size <= MAX_PATH_PROBABILITY_STEPS:
        raise ParameterError(f"path length must be in [1, {MAX_PATH_PROBABILITY_STEPS}]")
    if np.any(np.abs(x) != 1):
        raise ParameterError("path entries must be +1 or -1")
    prob = params.q if x[0] == 1 else 1.0 - params.q
    s = int(x[0])
    for n in range(1, x.size):
        p = float(_step_probs(params, n, np.array([s]))[0])
        prob *= p if x[n] == 1 else 1.0 - p
        s += int(x[n])
    return prob


def _dp(params: WalkParams, n: int) -> np.ndarray:
    # dist[h] = P(#{+1 among X_1..X_t} = h)
    dist = np.array([1.0 - params.q, params.q])
    for t in range(1, n):
        h = np.arange(t + 1)
        p = _step_probs(params, t, 2 * h - t)
        new = np.zeros(t + 2)
        new[:-1] += dist * (1.0 - p)
        new[1:] += dist * p
        dist = new
    return dist


def _paths(params: WalkParams, n: int) -> np.ndarray:
    idx = np.arange(1 << n, dtype=np.int64)
    up = (idx & 1).astype(bool)
    prob = np.where(up, params.q, 1.0 - params.q)
    s = np.where(up, 1, -1)
    for t in range(1, n):
        up = ((idx >> t) & 1).astype(bool)
        p = _step_probs(params, t, s)
        prob = prob * np.where(up, p, 1.0 - p)
        s = s + np.where(up, 1, -1)
    dist = np.zeros(n + 1)
    np.add.at(dist, (s + n) // 2, prob)
    return dist


def enumerate_distribution(params: WalkParams, n: int, method: str = "dp") -> ExactDistribution:
    """Exact law of ``S_n``.

    ``method="dp"`` runs the ``O(n^2)`` Markov recursion (``n <= 10^4``);
    ``method="paths"`` sums over all ``2^n`` paths (``n <= 20``).
    """
    if int(n) != n or n < 1:
        raise ParameterError("n must be a positive integer")
    n = int(n)
    if method == "dp":
        if n > MAX_DP_STEPS:
            raise ParameterError(f"dp mode supports n <= {MAX_DP_STEPS}")
        probs = _dp(params, n)
    elif method == "paths":
        if n > MAX_PATH_STEPS:
            raise ParameterError(f"path enumeration supports n <= {MAX_PATH_STEPS}")
        probs = _paths(params, n)
    else:
        raise ParameterError(f"unknown method {method!r}")
    return ExactDistribution(n, np.arange(-n, n + 1, 2), probs)


def oracle_moments(params: WalkParams, n_max: int) -> tuple[np.ndarray, np.ndarray]:
    """``E[S_n]`` and ``E[S_n^2]`` for ``n = 0..n_max`` from the DP."""
    if n_max > MAX_DP_STEPS:
        raise ParameterError(f"dp mode supports n <= {MAX_DP_STEPS}")
    mean = np.zeros(n_max + 1)
    second = np.zeros(n_max + 1)
    dist = np.array([1.0 - params.q, params.q])
    for t in range(1, n_max + 1):
        s = 2.0 * np.arange(t + 1) - t
        mean[t] = np.dot(dist, s)
        second[t] = np.dot(dist, s * s)
        if t == n_max:
            break
        p = _step_probs(params, t, s)
        new = np.zeros(t + 2)
        new[:-1] += dist * (1.0 - p)
        new[1:] += dist * p
        dist = new
    return mean, second
