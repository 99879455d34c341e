"""Monte Carlo ensembles of independent walks.

Trajectories are grouped into fixed blocks of consecutive indices. Each block
is simulated by one worker, summarized into central-moment sums, and the
block summaries are merged in a fixed binary tree keyed on the block order.
Results therefore depend only on the master seed and ``m``, never on the
worker count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numba as nb
import numpy as np
from scipy import special

from .model import ParameterError, WalkParams
from .sampler import CHUNK, _TO_UNIT, _first_step, normalize_checkpoints, run_stream, trajectory_bitgen
from .sequences import SequenceTables, build_tables, drift_constant

BLOCK_SIZE = 512
WORKERS_ENV = "ERW_WORKERS"


def default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def geometric_grid(n_max: int, start: float = 1.0, ratio: float = 1.5) -> np.ndarray:
    """``{floor(start * ratio^j)} <= n_max``, always including ``n_max``."""
    if start < 1 or ratio <= 1:
        raise ParameterError("grid needs start >= 1 and ratio > 1")
    j_max = int(math.floor(math.log(n_max / start) / math.log(ratio))) + 1
    pts = np.floor(start * ratio ** np.arange(j_max + 1)).astype(np.int64)
    pts = pts[(pts >= 1) & (pts <= n_max)]
    return np.unique(np.append(pts, n_max))


# ----------------------------------------------------------------------------
# mergeable moments
# ----------------------------------------------------------------------------


@dataclass
class EnsembleStats:
    """Count, mean and central power sums ``M2, M3, M4`` per checkpoint."""

    checkpoints: np.ndarray
    count: int
    mean: np.ndarray
    m2: np.ndarray
    m3: np.ndarray
    m4: np.ndarray

    @classmethod
    def empty(cls, checkpoints) -> "EnsembleStats":
        k = len(checkpoints)
        z = np.zeros(k)
        return cls(np.asarray(checkpoints), 0, z.copy(), z.copy(), z.copy(), z.copy())

    @classmethod
    def from_samples(cls, checkpoints, x) -> "EnsembleStats":
        """Two-pass central sums of the rows of ``x`` (shape ``(m, K)``)."""
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.shape[0] == 0:
            return cls.empty(checkpoints)
        mean = x.mean(axis=0)
        d = x - mean
        d2 = d * d
        return cls(
            np.asarray(checkpoints), x.shape[0], mean, d2.sum(axis=0), (d2 * d).sum(axis=0), (d2 * d2).sum(axis=0)
        )

    def merge(self, other: "EnsembleStats") -> "EnsembleStats":
        """Pairwise combination of two disjoint summaries."""
        if not np.array_equal(self.checkpoints, other.checkpoints):
            raise ParameterError("cannot merge statistics over different checkpoints")
        na, nb_ = self.count, other.count
        if na == 0:
            return other
        if nb_ == 0:
            return self
        n = na + nb_
        delta = other.mean - self.mean
        d2 = delta * delta
        mean = self.mean + delta * (nb_ / n)
        m2 = self.m2 + other.m2 + d2 * na * nb_ / n
        m3 = (
            self.m3
            + other.m3
            + d2 * delta * na * nb_ * (na - nb_) / (n * n)
            + 3.0 * delta * (na * other.m2 - nb_ * self.m2) / n
        )
        m4 = (
            self.m4
            + other.m4
            + d2 * d2 * na * nb_ * (na * na - na * nb_ + nb_ * nb_) / (n**3)
            + 6.0 * d2 * (na * na * other.m2 + nb_ * nb_ * self.m2) / (n * n)
            + 4.0 * delta * (na * other.m3 - nb_ * self.m3) / n
        )
        return EnsembleStats(self.checkpoints, n, mean, m2, m3, m4)

    @property
    def var(self) -> np.ndarray:
        """Unbiased sample variance."""
        return self.m2 / (self.count - 1) if self.count > 1 else np.full_like(self.m2, np.nan)

    @property
    def skew(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return math.sqrt(self.count) * self.m3 / self.m2**1.5

    @property
    def excess_kurtosis(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.count * self.m4 / (self.m2 * self.m2) - 3.0

    @property
    def se_mean(self) -> np.ndarray:
        return np.sqrt(self.var / self.count)

    @property
    def se_var(self) -> np.ndarray:
        """Standard error of the sample variance."""
        m = self.count
        mu4 = self.m4 / m
        v = self.var
        return np.sqrt(np.maximum(mu4 - v * v * (m - 3) / (m - 1), 0.0) / m)

    def rows(self) -> list[dict]:
        cols = dict(
            mean=self.mean, var=self.var, skew=self.skew, kurt=self.excess_kurtosis, se_mean=self.se_mean
        )
        return [
            {"n": int(n), "count": self.count, **{k: float(v[i]) for k, v in cols.items()}}
            for i, n in enumerate(self.checkpoints)
        ]


def merge_tree(parts: list[EnsembleStats]) -> EnsembleStats:
    """Merge in a fixed binary tree over the list order."""
    if not parts:
        raise ParameterError("nothing to merge")
    level = list(parts)
    while len(level) > 1:
        nxt = [level[i].merge(level[i + 1]) for i in range(0, len(level) - 1, 2)]
        if len(level) % 2:
            nxt.append(level[-1])
        level = nxt
    return level[0]


# ----------------------------------------------------------------------------
# ensemble runner
# ----------------------------------------------------------------------------


@dataclass
class EnsembleResult:
    params: WalkParams
    seed: int
    checkpoints: np.ndarray
    positions: np.ndarray  # (m, K) int64
    stats: EnsembleStats

    @property
    def m(self) -> int:
        return self.positions.shape[0]

    def column(self, n: int) -> np.ndarray:
        i = np.searchsorted(self.checkpoints, n)
        if i >= len(self.checkpoints) or self.checkpoints[i] != n:
            raise KeyError(f"time {n} is not a checkpoint")
        return self.positions[:, i]


def _blocks(m: int, block: int):
    return [(lo, min(lo + block, m)) for lo in range(0, m, block)]


def run_ensemble(
    params: WalkParams,
    n_max: int,
    checkpoints,
    m: int,
    seed: int,
    workers: int | None = None,
    block: int = BLOCK_SIZE,
) -> EnsembleResult:
    """Simulate trajectories ``0..m-1`` of master seed ``seed``.

    Trajectory ``i`` is identical to ``simulate(params, n_max, checkpoints,
    seed, index=i)``. Exceptions raised in a worker propagate; no partial
    result is returned.
    """
    if int(m) != m or m < 1:
        raise ParameterError("m must be a positive integer")
    m = int(m)
    ck = normalize_checkpoints(checkpoints, n_max)
    eps = params.schedule.table(int(ck[-1]))
    horizon = int(ck[-1])
    workers = default_workers() if workers is None else max(1, int(workers))
    positions = np.empty((m, ck.size), dtype=np.int64)

    def work(span):
        lo, hi = span
        for i in range(lo, hi):
            positions[i] = run_stream(params, eps, horizon, ck, trajectory_bitgen(seed, i))
        return EnsembleStats.from_samples(ck, positions[lo:hi])

    spans = _blocks(m, block)
    if workers == 1:
        parts = [work(s) for s in spans]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(work, spans))
    return EnsembleResult(params, int(seed), ck, positions, merge_tree(parts))


# ----------------------------------------------------------------------------
# fluctuation around the random drift
# ----------------------------------------------------------------------------


def _require_supercritical(params: WalkParams) -> None:
    params.require_verifiable()
    if not 0.5 < params.alpha < 1.0:
        raise ParameterError(f"needs 1/2 < alpha < 1, got alpha = {params.alpha}")


@dataclass
class FluctuationResult:
    """Samples of ``T = (S_n - E[S_n] - M_N a_n) / sigma_{n,N}``.

    ``M_N = (S_N - E[S_N]) / a_N`` stands in for ``W`` and
    ``sigma_{n,N}^2 = a_n^2 sum_{k=n+1}^N E[d_k^2]`` makes ``T`` exactly
    centred with unit variance at every finite ``(n, N)``.
    """

    params: WalkParams
    n: int
    N: int
    s_n: np.ndarray
    s_N: np.ndarray
    t_values: np.ndarray
    sigma: float
    sigma_asymptotic: float

    @property
    def sigma_ratio(self) -> float:
        """``sigma_{n,N}`` over ``sqrt((1 - eps^2) n / (2 alpha - 1))``."""
        return self.sigma / self.sigma_asymptotic

    @property
    def predicted_ratio(self) -> float:
        """Large-``n`` value ``sqrt(1 - (n/N)^(2 alpha - 1))`` of ``sigma_ratio``."""
        return math.sqrt(1.0 - (self.n / self.N) ** (2.0 * self.params.alpha - 1.0))


def fluctuation_scale(params: WalkParams, n: int, N: int, tables: SequenceTables | None = None):
    """Exact ``sigma_{n,N}`` and the asymptotic ``sqrt((1-eps^2) n/(2 alpha-1))``."""
    if tables is None:
        tables = build_tables(params, N)
    s2 = tables.window_variance(n, N)
    sigma = math.exp(tables.log_a[n]) * math.sqrt(s2)
    eps = params.schedule.limit
    asym = math.sqrt((1.0 - eps * eps) * n / (2.0 * params.alpha - 1.0))
    return sigma, asym


def supercritical_fluctuation(
    params: WalkParams,
    n: int,
    N: int | None = None,
    m: int = 20_000,
    seed: int = 0,
    workers: int | None = None,
) -> FluctuationResult:
    """Fluctuation statistic of ``S_n`` around ``W a_n`` (``N`` defaults to ``20 n``)."""
    _require_supercritical(params)
    N = 20 * n if N is None else N
    if not 1 <= n < N:
        raise ParameterError(f"need 1 <= n < N, got n={n}, N={N}")
    tables = build_tables(params, N)
    ens = run_ensemble(params, N, [n, N], m, seed, workers)
    s_n = ens.positions[:, 0]
    s_N = ens.positions[:, 1]
    a_n, a_N = math.exp(tables.log_a[n]), math.exp(tables.log_a[N])
    m_N = (s_N - tables.mean[N]) / a_N
    sigma, asym = fluctuation_scale(params, n, N, tables)
    t = (s_n - tables.mean[n] - m_N * a_n) / sigma
    return FluctuationResult(params, n, N, s_n, s_N, t, sigma, asym)


# ----------------------------------------------------------------------------
# the limit W
# ----------------------------------------------------------------------------


@dataclass
class WEstimate:
    """Per-trajectory ``W_raw = (S_N - E[S_N]) / a_N`` and ``W_hat = S_N / N^alpha``."""

    params: WalkParams
    N: int
    w_raw: np.ndarray
    w_hat: np.ndarray
    var_target: float  # sum_{k<=N} E[d_k^2] = Var(M_N)
    w_hat_mean_exact: float  # E[S_N] / N^alpha
    w_hat_mean_limit: float  # C(alpha, beta, gamma), or beta/Gamma(alpha+1) without bias

    def summary(self) -> dict:
        out = {}
        for name, x in (("w_raw", self.w_raw), ("w_hat", self.w_hat)):
            st = EnsembleStats.from_samples([self.N], x)
            out[name] = {
                "mean": float(st.mean[0]),
                "se_mean": float(st.se_mean[0]),
                "var": float(st.var[0]),
                "se_var": float(st.se_var[0]),
            }
        return out


def estimate_W(
    params: WalkParams, N: int, m: int, seed: int = 0, workers: int | None = None
) -> WEstimate:
    _require_supercritical(params)
    sched = params.schedule
    alpha = params.alpha
    if sched.kind == "power":
        if sched.gamma + alpha <= 1.0:
            raise ParameterError("W_hat exists only for gamma + alpha > 1")
        limit = drift_constant(alpha, params.beta, sched.gamma)
    elif sched.limit == 0.0 and sched.kind != "custom":
        limit = params.beta / special.gamma(alpha + 1.0)
    else:
        limit = math.nan
    tables = build_tables(params, N)
    ens = run_ensemble(params, N, [N], m, seed, workers)
    s_N = ens.positions[:, 0].astype(float)
    a_N = math.exp(tables.log_a[N])
    return WEstimate(
        params,
        N,
        (s_N - tables.mean[N]) / a_N,
        s_N / N**alpha,
        math.fsum(tables.step_var[1 : N + 1]),
        float(tables.mean[N]) / N**alpha,
        limit,
    )


# ----------------------------------------------------------------------------
# iterated-logarithm diagnostic
# ----------------------------------------------------------------------------


@nb.njit(cache=True, nogil=True)
def _lil_advance(raw, n, s, alpha, eps, offset, slope, dens, n0, n_end, rec, ri, plus, minus, out_p, out_m):
    # R_k(n) = (s - offset[n] - slope[n]) / dens[k, n] for n in [n0, n_end]
    half = 0.5 * alpha
    c1 = 0.5 * (1.0 - alpha)
    K = dens.shape[0]
    sf = float(s)
    for j in range(raw.shape[0]):
        u = (raw[j] >> np.uint64(11)) * _TO_UNIT
        p = (half + c1 * (1.0 + eps[n])) + (half / n) * sf
        sf += 1.0 if u < p else -1.0
        n += 1
        if n >= n0 and n <= n_end:
            y = sf - offset[n] - slope[n]
            for k in range(K):
                r = y / dens[k, n]
                if r > plus[k]:
                    plus[k] = r
                if -r > minus[k]:
                    minus[k] = -r
            if ri < rec.shape[0] and rec[ri] == n:
                for k in range(K):
                    out_p[k, ri] = plus[k]
                    out_m[k, ri] = minus[k]
                ri += 1
    return n, int(sf), ri


@dataclass
class LilRecord:
    """Running maxima of ``+R_n`` and ``-R_n`` at logarithmically spaced times."""

    seed: int
    times: np.ndarray
    normalizations: tuple[str, ...]
    plus_max: np.ndarray  # (K, T)
    minus_max: np.ndarray  # (K, T)
    w_proxy: float = math.nan

    def final(self, k: int = 0) -> float:
        """Running max of ``|R_n|`` over the whole window."""
        return float(max(self.plus_max[k, -1], self.minus_max[k, -1]))

    def rows(self) -> list[dict]:
        out = []
        for k, name in enumerate(self.normalizations):
            for i, t in enumerate(self.times):
                out.append(
                    {
                        "seed": self.seed,
                        "normalization": name,
                        "n": int(t),
                        "max_plus": float(self.plus_max[k, i]),
                        "max_minus": float(self.minus_max[k, i]),
                    }
                )
        return out


def _phi(t):
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.sqrt(2.0 * t * np.log(np.log(t)))


def _phi_hat(t):
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.sqrt(2.0 * t * np.log(np.abs(np.log(t))))


@dataclass
class _LilPlan:
    names: tuple[str, ...]
    offset: np.ndarray
    dens: np.ndarray
    n0: int
    n_end: int
    two_pass: bool = False
    a: np.ndarray | None = field(default=None, repr=False)
    mean_N: float = 0.0


def _lil_plan(params: WalkParams, n_max: int, n_start: int, outer_ratio: int) -> _LilPlan:
    params.require_verifiable()
    alpha = params.alpha
    eps = params.schedule.limit
    one_m = 1.0 - eps * eps
    n = np.arange(n_max + 1, dtype=float)
    if alpha > 0.5:
        tables = build_tables(params, n_max)
        a = np.exp(tables.log_a)
        n_end = n_max // outer_ratio
        # sum_{k=n+1}^{N} E[d_k^2]
        tail = np.append(tables.tail_sums()[1:], 0.0)
        with np.errstate(divide="ignore"):
            dens = np.vstack([a * _phi_hat(one_m * n / (2 * alpha - 1)), a * _phi_hat(tail)])
        names = ("theorem", "tail")
        plan = _LilPlan(names, tables.mean.copy(), dens, 0, n_end, True, a, float(tables.mean[n_max]))
    else:
        from .sequences import exact_mean

        mean = exact_mean(params, n_max)
        if alpha == 0.5:
            with np.errstate(divide="ignore", invalid="ignore"):
                v = one_m * n * np.log(n)
        else:
            v = one_m * n / (1.0 - 2.0 * alpha)
        dens = _phi(v)[None, :]
        plan = _LilPlan(("phi",), mean, dens, 0, n_max)
    valid = np.all(np.isfinite(plan.dens) & (plan.dens > 0), axis=0)
    valid[: max(n_start, 2)] = False
    idx = np.flatnonzero(valid[: plan.n_end + 1])
    if idx.size == 0:
        raise ParameterError("no time in the window where the envelope is defined")
    plan.n0 = int(idx[0])
    return plan


def log_times(n0: int, n_end: int, per_decade: int = 10) -> np.ndarray:
    k0 = math.floor(per_decade * math.log10(n0))
    k1 = math.ceil(per_decade * math.log10(n_end))
    t = np.floor(10.0 ** (np.arange(k0, k1 + 1) / per_decade)).astype(np.int64)
    t = t[(t >= n0) & (t <= n_end)]
    return np.unique(np.append(t, n_end))


def _lil_one(params, eps, plan: _LilPlan, n_max: int, seed: int, rec: np.ndarray) -> LilRecord:
    K = plan.dens.shape[0]
    slope = np.zeros(1)
    w = math.nan
    if plan.two_pass:
        s_N = run_stream(params, eps, n_max, np.array([n_max]), trajectory_bitgen(seed, 0))[0]
        w = (s_N - plan.mean_N) / plan.a[n_max]
        slope = w * plan.a
    else:
        slope = np.zeros(n_max + 1)
    plus = np.full(K, -np.inf)
    minus = np.full(K, -np.inf)
    out_p = np.full((K, rec.size), np.nan)
    out_m = np.full((K, rec.size), np.nan)
    bitgen = trajectory_bitgen(seed, 0)
    horizon = plan.n_end
    raw = bitgen.random_raw(min(CHUNK, horizon))
    s = _first_step(raw[0], params.q)
    n, ri = 1, 0
    args = (params.alpha, eps, plan.offset, slope, plan.dens, plan.n0, plan.n_end, rec)
    n, s, ri = _lil_advance(raw[1:], n, s, *args, ri, plus, minus, out_p, out_m)
    while n < horizon:
        raw = bitgen.random_raw(min(CHUNK, horizon - n))
        n, s, ri = _lil_advance(raw, n, s, *args, ri, plus, minus, out_p, out_m)
    return LilRecord(int(seed), rec, plan.names, out_p, out_m, w)


def lil_diagnostic(
    params: WalkParams,
    n_max: int,
    seeds,
    n_start: int = 100,
    per_decade: int = 10,
    outer_ratio: int = 20,
    workers: int | None = None,
) -> list[LilRecord]:
    """Running-maximum records of the iterated-logarithm ratio, one per seed.

    For ``alpha <= 1/2`` the ratio is ``(S_n - E[S_n]) / phi(v_n)`` with the
    fluctuation theorem's variance scale ``v_n``. For ``alpha > 1/2`` the
    numerator is ``S_n - E[S_n] - M_N a_n`` with ``M_N`` taken at the outer
    horizon ``N = n_max`` and the record stops at ``N / outer_ratio``; two
    denominators are reported: ``a_n phi_hat((1-eps^2) n/(2 alpha-1))``
    ("theorem") and ``a_n phi_hat(sum_{k>n} E[d_k^2])`` ("tail").

    Diagnostic only; there is no pass/fail at finite horizon.
    """
    plan = _lil_plan(params, n_max, n_start, outer_ratio)
    rec = log_times(plan.n0, plan.n_end, per_decade)
    eps = params.schedule.table(n_max)
    seeds = [int(s) for s in seeds]
    workers = default_workers() if workers is None else max(1, int(workers))
    if workers == 1:
        return [_lil_one(params, eps, plan, n_max, s, rec) for s in seeds]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda s: _lil_one(params, eps, plan, n_max, s, rec), seeds))
