"""Exact reinforcement sequences and moment recursions.

Everything here is deterministic. Long tables (up to ~1e7 entries) are built
by compiled forward recursions; every running sum uses Neumaier compensation.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numba as nb
import numpy as np
from scipy import special

from .model import BiasSchedule, ParameterError, WalkParams

# numerator of E[d_k^2] below this is treated as a numerical fault
NEGATIVE_VARIANCE_TOL = 1e-12


class NumericalFault(ArithmeticError):
    """An exact quantity came out with an impossible value."""


# ----------------------------------------------------------------------------
# compiled kernels
# ----------------------------------------------------------------------------


@nb.njit(cache=True)
def _log_product_table(c, n_max):
    # log prod_{k=1}^{n-1} (1 + c/k) for n = 0..n_max
    out = np.zeros(n_max + 1)
    s = 0.0
    comp = 0.0
    for n in range(2, n_max + 1):
        x = math.log1p(c / (n - 1))
        t = s + x
        if abs(s) >= abs(x):
            comp += (s - t) + x
        else:
            comp += (x - t) + s
        s = t
        out[n] = s + comp
    return out


@nb.njit(cache=True)
def _mean_forward(alpha, beta, eps, n_max):
    m = np.zeros(n_max + 1)
    m[1] = beta
    for n in range(1, n_max):
        m[n + 1] = (1.0 + alpha / n) * m[n] + (1.0 - alpha) * eps[n]
    return m


@nb.njit(cache=True)
def _mean_closed(alpha, beta, eps, log_a, n_max):
    # beta a_n + (1-alpha) a_n sum_{l=1}^{n-1} eps_l / a_{l+1}, plus the
    # magnitude of the summands (for relative comparisons near zero)
    m = np.zeros(n_max + 1)
    mag = np.zeros(n_max + 1)
    s = 0.0
    comp = 0.0
    sabs = 0.0
    for n in range(1, n_max + 1):
        if n >= 2:
            x = eps[n - 1] * math.exp(-log_a[n])
            t = s + x
            if abs(s) >= abs(x):
                comp += (s - t) + x
            else:
                comp += (x - t) + s
            s = t
            sabs += abs(x)
        a = math.exp(log_a[n])
        m[n] = a * (beta + (1.0 - alpha) * (s + comp))
        mag[n] = a * (abs(beta) + (1.0 - alpha) * sabs)
    return m, mag


@nb.njit(cache=True)
def _second_moment_forward(alpha, eps, mean, n_max):
    q = np.zeros(n_max + 1)
    q[1] = 1.0
    for n in range(1, n_max):
        q[n + 1] = (1.0 + 2.0 * alpha / n) * q[n] + 2.0 * (1.0 - alpha) * eps[n] * mean[n] + 1.0
    return q


@nb.njit(cache=True)
def _step_variance_numerators(alpha, beta, eps, mean, sm, n_max):
    # 1 - E[(E[X_k | F_{k-1}])^2] for k = 1..n_max
    num = np.zeros(n_max + 1)
    num[1] = 1.0 - beta * beta
    om = 1.0 - alpha
    for k in range(1, n_max):
        e = eps[k]
        num[k + 1] = (
            1.0
            - alpha * alpha * sm[k] / (k * k)
            - 2.0 * alpha * om * e * mean[k] / k
            - om * om * e * e
        )
    return num


@nb.njit(cache=True)
def _compensated_cumsum(x):
    out = np.empty_like(x)
    s = 0.0
    comp = 0.0
    for i in range(x.shape[0]):
        v = x[i]
        t = s + v
        if abs(s) >= abs(v):
            comp += (s - t) + v
        else:
            comp += (v - t) + s
        s = t
        out[i] = s + comp
    return out


def compensated_cumsum(x: np.ndarray) -> np.ndarray:
    """Running sum with Neumaier compensation."""
    return _compensated_cumsum(np.ascontiguousarray(x, dtype=float))


# ----------------------------------------------------------------------------
# tables
# ----------------------------------------------------------------------------


def _check_horizon(n_max) -> int:
    if isinstance(n_max, bool) or int(n_max) != n_max or n_max < 1:
        raise ParameterError(f"n_max must be a positive integer, got {n_max!r}")
    return int(n_max)


def log_reinforcement(alpha: float, n_max: int) -> np.ndarray:
    """``log a_n`` for ``n = 0..n_max`` where ``a_n = prod_{k<n} (1 + alpha/k)``.

    The product is accumulated as a compensated sum of ``log1p(alpha/k)``.
    Relative accuracy of ``exp(log a_n)`` is ~1e-15 up to ``n = 1e7``.
    """
    if not math.isfinite(alpha):
        raise ParameterError("alpha must be finite")
    return _log_product_table(float(alpha), _check_horizon(n_max))


def gamma_ratio_a(alpha: float, n) -> np.ndarray:
    """Closed form ``Gamma(n+alpha) / (Gamma(n) Gamma(alpha+1))`` for ``n >= 1``."""
    n = np.asarray(n, dtype=float)
    return special.poch(n, alpha) / special.gamma(alpha + 1.0)


@dataclass(frozen=True)
class SequenceTables:
    """Exact tables indexed by time ``n = 0..n_max``.

    Attributes
    ----------
    log_a, log_a2 : ndarray
        ``log a_n`` and ``log a'_n`` (products of ``1 + alpha/k`` and
        ``1 + 2 alpha/k``).
    mean, second_moment : ndarray or None
        ``E[S_n]`` and ``E[S_n^2]``.
    step_var : ndarray or None
        ``E[d_k^2]``, the second moments of the increments of
        ``M_n = (S_n - E[S_n]) / a_n``. Entry 0 is 0.
    """

    params: WalkParams
    n_max: int
    log_a: np.ndarray
    log_a2: np.ndarray
    mean: np.ndarray | None = None
    second_moment: np.ndarray | None = None
    step_var: np.ndarray | None = None

    def __post_init__(self):
        for name in ("log_a", "log_a2", "mean", "second_moment", "step_var"):
            arr = getattr(self, name)
            if arr is not None:
                arr.setflags(write=False)

    @property
    def a(self) -> np.ndarray:
        return np.exp(self.log_a)

    @property
    def a2(self) -> np.ndarray:
        return np.exp(self.log_a2)

    @property
    def variance(self) -> np.ndarray:
        """``Var(S_n)``."""
        return self.second_moment - self.mean**2

    @property
    def martingale_variance(self) -> np.ndarray:
        """``Var(M_n) = Var(S_n) / a_n^2``."""
        return self.variance * np.exp(-2.0 * self.log_a)

    def partial_step_sums(self) -> np.ndarray:
        """``sum_{k<=n} E[d_k^2]``."""
        return compensated_cumsum(self.step_var)

    def tail_sums(self) -> np.ndarray:
        """``s_n^2 = sum_{k=n}^{n_max} E[d_k^2]`` (truncated at the horizon)."""
        return compensated_cumsum(self.step_var[::-1])[::-1].copy()

    def window_variance(self, n: int, N: int) -> float:
        """``sum_{k=n+1}^{N} E[d_k^2]``."""
        if not 0 <= n < N <= self.n_max:
            raise ParameterError(f"need 0 <= n < N <= {self.n_max}, got n={n}, N={N}")
        return float(math.fsum(self.step_var[n + 1 : N + 1]))


def build_reinforcement_sequences(params: WalkParams, n_max: int) -> SequenceTables:
    """``a_n`` and ``a'_n`` in log space (moment fields left empty)."""
    n_max = _check_horizon(n_max)
    return SequenceTables(
        params, n_max, log_reinforcement(params.alpha, n_max), log_reinforcement(2.0 * params.alpha, n_max)
    )


def exact_mean(params: WalkParams, n_max: int) -> np.ndarray:
    """``E[S_n]`` for ``n = 0..n_max`` by forward recursion."""
    n_max = _check_horizon(n_max)
    eps = params.schedule.table(n_max)
    return _mean_forward(params.alpha, params.beta, eps, n_max)


def exact_mean_closed_form(params: WalkParams, n_max: int, log_a=None):
    """``E[S_n]`` from the summed closed form, with the summand magnitudes.

    Returns ``(mean, magnitude)``; ``magnitude`` bounds the size of the terms
    entering each value and is the natural scale for relative comparisons.
    """
    n_max = _check_horizon(n_max)
    if log_a is None:
        log_a = log_reinforcement(params.alpha, n_max)
    eps = params.schedule.table(n_max)
    return _mean_closed(params.alpha, params.beta, eps, log_a, n_max)


def exact_second_moment(params: WalkParams, n_max: int, mean=None) -> np.ndarray:
    """``E[S_n^2]`` for ``n = 0..n_max`` by forward recursion."""
    n_max = _check_horizon(n_max)
    if mean is None:
        mean = exact_mean(params, n_max)
    eps = params.schedule.table(n_max)
    return _second_moment_forward(params.alpha, eps, mean, n_max)


def exact_step_variances(params: WalkParams, n_max: int, mean=None, second_moment=None, log_a=None):
    """Increment second moments ``E[d_k^2]`` and their tail sums.

    ``E[d_{k+1}^2] = (1 - E[(E[X_{k+1} | F_k])^2]) / a_{k+1}^2`` expanded with
    the exact first two moments of ``S_k``.

    Returns
    -------
    step_var : ndarray
        ``E[d_k^2]`` for ``k = 0..n_max`` (entry 0 is 0).
    tail : ndarray
        ``tail[n] = sum_{k=n}^{n_max} E[d_k^2]``.

    Raises
    ------
    NumericalFault
        If any numerator is negative beyond round-off.
    """
    n_max = _check_horizon(n_max)
    if mean is None:
        mean = exact_mean(params, n_max)
    if second_moment is None:
        second_moment = exact_second_moment(params, n_max, mean)
    if log_a is None:
        log_a = log_reinforcement(params.alpha, n_max)
    eps = params.schedule.table(n_max)
    num = _step_variance_numerators(params.alpha, params.beta, eps, mean, second_moment, n_max)
    bad = np.flatnonzero(num < -NEGATIVE_VARIANCE_TOL)
    if bad.size:
        k = int(bad[0])
        raise NumericalFault(f"negative conditional variance at k={k}: {num[k]:.3e}")
    step_var = num * np.exp(-2.0 * log_a)
    tail = compensated_cumsum(step_var[::-1])[::-1].copy()
    return step_var, tail


def build_tables(params: WalkParams, n_max: int) -> SequenceTables:
    """All exact tables for ``params`` up to ``n_max``."""
    n_max = _check_horizon(n_max)
    log_a = log_reinforcement(params.alpha, n_max)
    log_a2 = log_reinforcement(2.0 * params.alpha, n_max)
    mean = exact_mean(params, n_max)
    sm = exact_second_moment(params, n_max, mean)
    step_var, _ = exact_step_variances(params, n_max, mean, sm, log_a)
    return SequenceTables(params, n_max, log_a, log_a2, mean, sm, step_var)


# ----------------------------------------------------------------------------
# asymptotics of the mean under a power-law bias
# ----------------------------------------------------------------------------


def _bernoulli_poly(k: int, x: float) -> float:
    b = special.bernoulli(k)
    return float(sum(special.comb(k, j, exact=True) * b[j] * x ** (k - j) for j in range(k + 1)))


@functools.lru_cache(maxsize=1024)
def gamma_ratio_coefficients(a: float, order: int = 10) -> np.ndarray:
    """Coefficients ``c_j`` with ``Gamma(z+1)/Gamma(z+1+a) ~ z^-a sum_j c_j z^-j``.

    Cached; the returned array is read-only.
    """
    g = np.zeros(order + 1)
    for k in range(1, order + 1):
        g[k] = (-1) ** (k + 1) * (_bernoulli_poly(k + 1, 1.0) - _bernoulli_poly(k + 1, 1.0 + a)) / (k * (k + 1))
    c = np.zeros(order + 1)
    c[0] = 1.0
    for j in range(1, order + 1):
        c[j] = sum(k * g[k] * c[j - k] for k in range(1, j + 1)) / j
    c.setflags(write=False)
    return c


def gamma_ratio_tail(a: float, p: float, start: int, order: int = 10) -> float:
    """``sum_{z>=start} z^-p Gamma(z+1)/Gamma(z+1+a)`` via Hurwitz zeta terms.

    Needs ``p + a > 1``. With ``start`` in the thousands the truncation of the
    asymptotic series is far below double precision.
    """
    s = p + a
    if s <= 1.0:
        raise ParameterError(f"tail diverges for exponent {s}")
    c = gamma_ratio_coefficients(a, order)
    return float(sum(c[j] * special.zeta(s + j, start) for j in range(order + 1)))


# exact terms summed before switching to the asymptotic tail
_SERIES_SPLIT = 4096


def bias_series(alpha: float, gamma: float) -> float:
    """``sum_{l>=1} l^-gamma / a_{l+1}`` (finite iff ``gamma + alpha > 1``)."""
    L = _SERIES_SPLIT
    log_a = log_reinforcement(alpha, L)
    ell = np.arange(1, L, dtype=float)
    head = math.fsum(ell ** (-gamma) * np.exp(-log_a[2 : L + 1]))
    # 1/a_{l+1} = Gamma(alpha+1) Gamma(l+1)/Gamma(l+1+alpha)
    tail = special.gamma(alpha + 1.0) * gamma_ratio_tail(alpha, gamma, L)
    return head + tail


def drift_constant(alpha: float, beta: float, gamma: float) -> float:
    """``C(alpha, beta, gamma) = lim E[S_n] / n^alpha`` when ``gamma > 1 - alpha``."""
    if gamma <= 0:
        raise ParameterError("gamma must be > 0")
    if not 0.0 <= alpha < 1.0:
        raise ParameterError("alpha must lie in [0, 1)")
    if gamma + alpha <= 1.0:
        raise ParameterError("C(alpha, beta, gamma) exists only for gamma > 1 - alpha")
    return (beta + (1.0 - alpha) * bias_series(alpha, gamma)) / special.gamma(alpha + 1.0)


def drift_second_moment(alpha: float, beta: float, gamma: float, horizon: int = 10**6) -> float:
    """``lim E[S_n^2] / n^(2 alpha)`` for ``alpha > 1/2`` and ``gamma > 1 - alpha``.

    Sums the exact terms to ``horizon`` and closes both series with their
    leading-order tails. Accuracy is roughly ``horizon^(2(1-gamma-alpha))``
    relative, i.e. ~1e-6 for typical cells; adequate for reporting.
    """
    if not 0.5 < alpha < 1.0:
        raise ParameterError("second moment of the limit needs 1/2 < alpha < 1")
    if gamma + alpha <= 1.0:
        raise ParameterError("needs gamma > 1 - alpha")
    params = WalkParams(alpha, beta, BiasSchedule.power_law(gamma))
    L = horizon
    log_a2 = log_reinforcement(2.0 * alpha, L)
    mean = exact_mean(params, L)
    eps = params.schedule.table(L)
    g2 = special.gamma(2.0 * alpha + 1.0)
    # sum_{j>=1} 1/a'_j ; 1/a'_{z+1} = Gamma(2a+1) Gamma(z+1)/Gamma(z+1+2a)
    first = math.fsum(np.exp(-log_a2[1 : L + 1])) + g2 * gamma_ratio_tail(2.0 * alpha, 0.0, L)
    second = math.fsum(eps[1:L] * mean[1:L] * np.exp(-log_a2[2 : L + 1]))
    second += drift_constant(alpha, beta, gamma) * g2 * float(special.zeta(gamma + alpha, L))
    return (first + 2.0 * (1.0 - alpha) * second) / g2


BOUNDARY_TOL = 1e-12


@dataclass(frozen=True)
class MeanAsymptote:
    """``E[S_n] ~ constant * n^exponent * (log n)^log_power``."""

    case: str  # "memory" (gamma > 1-alpha), "balanced", "bias" (gamma < 1-alpha)
    exponent: float
    log_power: int
    constant: float

    def __call__(self, n):
        n = np.asarray(n, dtype=float)
        return self.constant * n**self.exponent * np.log(n) ** self.log_power


def mean_asymptote(params: WalkParams) -> MeanAsymptote:
    """Leading behaviour of ``E[S_n]`` under a power-law bias ``eps_n = n^-gamma``."""
    if params.schedule.kind != "power":
        raise ParameterError("mean_asymptote needs a power-law schedule")
    alpha, beta, gamma = params.alpha, params.beta, params.schedule.gamma
    if alpha >= 1.0:
        raise ParameterError("alpha must be < 1")
    edge = gamma - (1.0 - alpha)
    if abs(edge) <= BOUNDARY_TOL:
        return MeanAsymptote("balanced", alpha, 1, 1.0 - alpha)
    if edge > 0:
        return MeanAsymptote("memory", alpha, 0, drift_constant(alpha, beta, gamma))
    return MeanAsymptote("bias", 1.0 - gamma, 0, (1.0 - alpha) / (1.0 - gamma - alpha))
