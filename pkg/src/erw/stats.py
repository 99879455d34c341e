"""Normality checks, chi-square goodness of fit and scaling exponents."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import special
from scipy import stats as sps

from .ensemble import EnsembleStats
from .model import ParameterError

MIN_KS_SAMPLES = 100


def _finite_1d(samples, name="samples") -> np.ndarray:
    x = np.asarray(samples, dtype=float).ravel()
    if not np.all(np.isfinite(x)):
        raise ParameterError(f"{name} contain non-finite values")
    return x


def ks_distance_std_normal(samples) -> float:
    """Two-sided Kolmogorov-Smirnov distance to ``N(0, 1)``.

    ``D = max_i max(i/m - Phi(x_(i)), Phi(x_(i)) - (i-1)/m)`` on the sorted
    sample. ``Phi`` comes from ``scipy.special.ndtr`` (absolute error well
    below 1e-12).
    """
    x = _finite_1d(samples)
    m = x.size
    if m < MIN_KS_SAMPLES:
        raise ParameterError(f"KS distance needs at least {MIN_KS_SAMPLES} samples, got {m}")
    cdf = special.ndtr(np.sort(x))
    i = np.arange(1, m + 1)
    return float(max(np.max(i / m - cdf), np.max(cdf - (i - 1) / m)))


@dataclass(frozen=True)
class NormalityReport:
    m: int
    ks: float
    mean: float
    se_mean: float
    var: float
    se_var: float
    skew: float
    se_skew: float
    excess_kurtosis: float
    se_kurtosis: float

    def to_dict(self) -> dict:
        return asdict(self)


def normality_report(samples) -> NormalityReport:
    """KS distance plus the first four sample moments with standard errors.

    Skewness and excess kurtosis are the moment estimators
    ``sqrt(m) M3 / M2^1.5`` and ``m M4 / M2^2 - 3``; their standard errors
    are the usual normal-theory values.
    """
    x = _finite_1d(samples)
    m = x.size
    st = EnsembleStats.from_samples([0], x)
    se_skew = math.sqrt(6.0 * m * (m - 1) / ((m - 2) * (m + 1) * (m + 3)))
    se_kurt = 2.0 * se_skew * math.sqrt((m * m - 1.0) / ((m - 3) * (m + 5)))
    return NormalityReport(
        m=m,
        ks=ks_distance_std_normal(x),
        mean=float(st.mean[0]),
        se_mean=float(st.se_mean[0]),
        var=float(st.var[0]),
        se_var=float(st.se_var[0]),
        skew=float(st.skew[0]),
        se_skew=se_skew,
        excess_kurtosis=float(st.excess_kurtosis[0]),
        se_kurtosis=se_kurt,
    )


@dataclass(frozen=True)
class ChiSquareResult:
    statistic: float
    df: int
    p_value: float
    observed: np.ndarray
    expected: np.ndarray


def _merge_cells(obs, exp, min_expected):
    # left-to-right pooling; a short remainder joins the last retained cell
    out_o, out_e = [], []
    acc_o = acc_e = 0.0
    for o, e in zip(obs, exp):
        acc_o += o
        acc_e += e
        if acc_e >= min_expected:
            out_o.append(acc_o)
            out_e.append(acc_e)
            acc_o = acc_e = 0.0
    if acc_e > 0 or acc_o > 0:
        if out_e:
            out_o[-1] += acc_o
            out_e[-1] += acc_e
        else:
            out_o.append(acc_o)
            out_e.append(acc_e)
    return np.array(out_o), np.array(out_e)


def chi_square_gof(observed, expected_probs, min_expected: float = 5.0) -> ChiSquareResult:
    """Pearson statistic of counts against cell probabilities.

    Adjacent cells are pooled until each expected count reaches
    ``min_expected``; ``df`` is the number of pooled cells minus one.
    """
    obs = np.asarray(observed, dtype=float)
    probs = np.asarray(expected_probs, dtype=float)
    if obs.shape != probs.shape or obs.ndim != 1:
        raise ParameterError("observed and expected must be 1-d arrays of equal length")
    if np.any(obs < 0) or np.any(probs < 0):
        raise ParameterError("counts and probabilities must be nonnegative")
    if abs(probs.sum() - 1.0) > 1e-6:
        raise ParameterError(f"expected probabilities sum to {probs.sum()}, not 1")
    if np.any((probs == 0) & (obs > 0)):
        raise ParameterError("observed count in a cell with zero expected probability")
    total = obs.sum()
    o, e = _merge_cells(obs, total * probs, min_expected)
    if o.size < 2:
        raise ParameterError("fewer than two cells after pooling")
    stat = float(np.sum((o - e) ** 2 / e))
    df = o.size - 1
    return ChiSquareResult(stat, df, float(sps.chi2.sf(stat, df)), o, e)


@dataclass(frozen=True)
class ExponentFit:
    slope: float
    se: float
    intercept: float
    points: int


def exponent_regression(times, values, fraction: float = 0.5) -> ExponentFit:
    """Least-squares slope of ``log value`` on ``log time``.

    Only the last ``fraction`` of the points (by time) enter the fit.
    """
    t = _finite_1d(times, "times")
    v = _finite_1d(values, "values")
    if t.shape != v.shape:
        raise ParameterError("times and values differ in length")
    if np.any(v <= 0) or np.any(t <= 0):
        raise ParameterError("exponent regression needs positive times and values")
    if t.size < 5:
        raise ParameterError(f"exponent regression needs at least 5 points, got {t.size}")
    order = np.argsort(t, kind="stable")
    k = max(3, math.ceil(fraction * t.size))
    sel = order[-k:]
    fit = sps.linregress(np.log(t[sel]), np.log(v[sel]))
    return ExponentFit(float(fit.slope), float(fit.stderr), float(fit.intercept), int(k))
