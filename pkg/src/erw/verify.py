"""Verification suites.

Each suite returns a :class:`Verdict` holding named checks with the measured
value and the accepted interval. Interval half-widths (and SE multipliers)
are multiplied by ``scale``; the point targets never move.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import special

from .ensemble import estimate_W, lil_diagnostic, run_ensemble, supercritical_fluctuation
from .model import BiasSchedule, ParameterError, WalkParams
from .oracle import oracle_moments
from .sequences import (
    build_tables,
    drift_constant,
    exact_mean,
    exact_second_moment,
    gamma_ratio_a,
    log_reinforcement,
)
from .stats import exponent_regression, normality_report

LIL_BAND = (0.6, 1.3)
LIL_START = 10_000
LIL_MIN_INSIDE = 5
LIL_SEEDS = tuple(range(1, 9))


@dataclass
class Check:
    name: str
    criterion: int
    value: float
    lo: float
    hi: float
    note: str = ""

    @property
    def passed(self) -> bool:
        return bool(math.isfinite(self.value) and self.lo <= self.value <= self.hi)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d


@dataclass
class Verdict:
    suite: str
    checks: list[Check] = field(default_factory=list)
    config: dict = field(default_factory=dict)
    elapsed_s: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, *args, **kw) -> Check:
        c = Check(*args, **kw)
        self.checks.append(c)
        return c

    def by_criterion(self) -> dict[int, bool]:
        out: dict[int, bool] = {}
        for c in self.checks:
            out[c.criterion] = out.get(c.criterion, True) and c.passed
        return out

    def to_dict(self) -> dict:
        return {
            "suite": self.suite,
            "passed": self.passed,
            "elapsed_s": self.elapsed_s,
            "config": self.config,
            "checks": [c.to_dict() for c in self.checks],
        }


def _band(target, rel=None, abs_=None, scale=1.0):
    w = abs(target) * rel if rel is not None else abs_
    return target - w * scale, target + w * scale


def _timed(fn):
    def wrapper(*args, **kw):
        t0 = time.perf_counter()
        v = fn(*args, **kw)
        v.elapsed_s = time.perf_counter() - t0
        return v

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


# ----------------------------------------------------------------------------
# deterministic suites
# ----------------------------------------------------------------------------

ORACLE_GRID = dict(
    alpha=(0.0, 0.5, 0.9),
    beta=(-0.5, 0.0, 1.0),
    schedule=(BiasSchedule.zero(), BiasSchedule.constant(0.3), BiasSchedule.power_law(0.5)),
)


def oracle_discrepancy(n_max: int = 16) -> dict:
    """Largest ``|recursion - DP|`` for both moments over the 3x3x3 grid."""
    worst_mean = worst_second = 0.0
    for a, b, sch in itertools.product(*ORACLE_GRID.values()):
        p = WalkParams(a, b, sch)
        om, os_ = oracle_moments(p, n_max)
        worst_mean = max(worst_mean, float(np.max(np.abs(exact_mean(p, n_max)[1:] - om[1:]))))
        worst_second = max(worst_second, float(np.max(np.abs(exact_second_moment(p, n_max)[1:] - os_[1:]))))
    return {"n_max": n_max, "cells": 27, "max_abs_mean": worst_mean, "max_abs_second": worst_second}


@_timed
def suite_exact(scale: float = 1.0) -> Verdict:
    """Oracle equivalence, the reinforcement sequence and the MSD table."""
    v = Verdict("exact", config={"scale": scale})

    t0 = time.perf_counter()
    rep = oracle_discrepancy(16)
    v.add("oracle max |E[S_n] error|", 1, rep["max_abs_mean"], 0.0, 1e-10)
    v.add("oracle max |E[S_n^2] error|", 1, rep["max_abs_second"], 0.0, 1e-10)
    v.add("oracle runtime [s]", 1, time.perf_counter() - t0, 0.0, 1.0)

    t0 = time.perf_counter()
    worst = 0.0
    ratio_lo, ratio_hi = math.inf, -math.inf
    for a in np.round(np.arange(1, 10) * 0.1, 10):
        n = np.arange(1, 10_001)
        prod = np.exp(log_reinforcement(a, 10_000)[1:])
        worst = max(worst, float(np.max(np.abs(prod / gamma_ratio_a(a, n) - 1.0))))
        big = 10**6
        r = math.exp(log_reinforcement(a, big)[big]) * special.gamma(a + 1.0) / big**a
        ratio_lo, ratio_hi = min(ratio_lo, r), max(ratio_hi, r)
    v.add("a_n product vs Gamma ratio, max rel", 2, worst, 0.0, 1e-10)
    v.add("min a_n Gamma(alpha+1)/n^alpha at 1e6", 2, ratio_lo, *_band(1.0, abs_=1e-3, scale=scale))
    v.add("max a_n Gamma(alpha+1)/n^alpha at 1e6", 2, ratio_hi, *_band(1.0, abs_=1e-3, scale=scale))
    v.add("a_n runtime [s]", 2, time.perf_counter() - t0, 0.0, 1.0)

    t0 = time.perf_counter()
    n = 10**7
    sm = exact_second_moment(WalkParams(0.2), n)[n]
    v.add("alpha=0.2: E[S_n^2](1-2a)/n", 3, sm * 0.6 / n, *_band(1.0, abs_=0.01, scale=scale))
    sm = exact_second_moment(WalkParams(0.5), n)[n]
    v.add("alpha=0.5: E[S_n^2]/(n log n)", 3, sm / (n * math.log(n)), *_band(1.0, abs_=0.10, scale=scale))
    sm = exact_second_moment(WalkParams(0.75), n)[n]
    v.add(
        "alpha=0.75: E[S_n^2](2a-1)Gamma(2a)/n^(2a)",
        3,
        sm * 0.5 * math.gamma(1.5) / n**1.5,
        *_band(1.0, abs_=0.03, scale=scale),
    )
    v.add("MSD runtime [s]", 3, time.perf_counter() - t0, 0.0, 30.0)
    return v


@_timed
def suite_phase(n: int = 10**7, scale: float = 1.0) -> Verdict:
    """Deterministic recursion checks of the decaying-bias phase table."""
    v = Verdict("phase", config={"n": n, "scale": scale})
    t0 = time.perf_counter()
    logn = math.log(n)

    def tables(a, g):
        return build_tables(WalkParams(a, 0.0, BiasSchedule.power_law(g)), n)

    t = tables(0.4, 0.3)
    norm = n**0.7
    v.add("i-a: E[S_n]/n^0.7", 8, t.mean[n] / norm, *_band(2.0, rel=0.03, scale=scale))
    decade = np.unique(np.geomspace(n // 10, n, 11).astype(np.int64))
    l2 = t.second_moment[decade] / decade**1.4 - 4.0 * t.mean[decade] / decade**0.7 + 4.0
    v.add("i-a: E[(S_n/n^0.7 - 2)^2]", 8, float(l2[-1]), 0.0, 0.05 * scale)
    v.add("i-a: L2 error decreasing over last decade", 8, float(np.all(np.diff(l2) < 0)), 1.0, 1.0)

    t = tables(0.7, 0.3)
    v.add("i-b: E[S_n]/(n^0.7 log n)", 8, t.mean[n] / (n**0.7 * logn), *_band(0.3, rel=0.10, scale=scale))

    t = tables(0.25, 0.5)
    v.add("ii-a: E[S_n]/sqrt(n)", 8, t.mean[n] / math.sqrt(n), *_band(3.0, rel=0.05, scale=scale))
    v.add("ii-a: Var(S_n)/n", 8, t.variance[n] / n, *_band(2.0, rel=0.05, scale=scale))

    t = tables(0.5, 0.5)
    v.add("ii-b: E[S_n]/(sqrt(n) log n)", 8, t.mean[n] / (math.sqrt(n) * logn), *_band(0.5, rel=0.10, scale=scale))

    t = tables(0.2, 0.8)
    grid = np.unique(np.floor(1.5 ** np.arange(0, int(math.log(n, 1.5)) + 1)).astype(np.int64))
    grid = grid[(grid >= 10) & (grid <= n)]
    fit = exponent_regression(grid, t.variance[grid])
    v.add("iii-a: Var(S_n) exponent", 8, fit.slope, *_band(1.0, abs_=0.02, scale=scale), note=f"se={fit.se:.2e}")
    v.add("phase runtime [s]", 8, time.perf_counter() - t0, 0.0, 120.0)
    return v


# ----------------------------------------------------------------------------
# Monte Carlo suites
# ----------------------------------------------------------------------------


def _clt_checks(v, crit, params, n, m, seed, workers, ks_max, scale, moments=True):
    tables = build_tables(params, n)
    ens = run_ensemble(params, n, [n], m, seed, workers)
    z = (ens.positions[:, 0] - tables.mean[n]) / math.sqrt(tables.variance[n])
    rep = normality_report(z)
    v.add("KS distance to N(0,1)", crit, rep.ks, 0.0, ks_max * scale)
    if moments:
        v.add("|skewness|", crit, abs(rep.skew), 0.0, 0.05 * scale)
        v.add("|kurtosis - 3|", crit, abs(rep.excess_kurtosis), 0.0, 0.10 * scale)
    v.config["normality"] = rep.to_dict()
    return rep


@_timed
def suite_diffusive(
    params: WalkParams | None = None, n: int = 10_000, m: int = 50_000, seed: int = 1, workers=None, scale=1.0
) -> Verdict:
    """CLT for ``alpha < 1/2`` normalized by the exact standard deviation."""
    params = params or WalkParams(0.2)
    params.require_verifiable()
    if params.alpha >= 0.5:
        raise ParameterError("diffusive suite needs alpha < 1/2")
    v = Verdict("diffusive", config={"params": params.to_dict(), "n": n, "m": m, "seed": seed, "scale": scale})
    _clt_checks(v, 4, params, n, m, seed, workers, 0.015, scale)
    return v


@_timed
def suite_critical(
    params: WalkParams | None = None, n: int = 100_000, m: int = 20_000, seed: int = 1, workers=None, scale=1.0
) -> Verdict:
    """CLT at ``alpha = 1/2`` normalized by the exact standard deviation."""
    params = params or WalkParams(0.5)
    params.require_verifiable()
    if params.alpha != 0.5:
        raise ParameterError("critical suite needs alpha = 1/2")
    v = Verdict("critical", config={"params": params.to_dict(), "n": n, "m": m, "seed": seed, "scale": scale})
    _clt_checks(v, 5, params, n, m, seed, workers, 0.02, scale, moments=False)
    return v


@_timed
def suite_supercritical(
    params: WalkParams | None = None,
    n: int = 10_000,
    N: int = 200_000,
    m: int = 20_000,
    seed: int = 1,
    workers=None,
    scale=1.0,
) -> Verdict:
    """Gaussian fluctuation around the random drift.

    Without ``params`` both ``alpha = 0.75`` and ``alpha = 0.6`` are run
    (master seeds ``seed`` and ``seed + 1``).
    """
    runs = [params] if params is not None else [WalkParams(0.75), WalkParams(0.6)]
    v = Verdict("supercritical", config={"n": n, "N": N, "m": m, "seed": seed, "scale": scale, "runs": []})
    for i, p in enumerate(runs):
        f = supercritical_fluctuation(p, n, N, m, seed + i, workers)
        rep = normality_report(f.t_values)
        tag = f"alpha={p.alpha:g}"
        v.add(f"{tag}: Var(T)", 6, rep.var, *_band(1.0, abs_=0.03, scale=scale))
        v.add(f"{tag}: KS distance to N(0,1)", 6, rep.ks, 0.0, 0.02 * scale)
        v.add(
            f"{tag}: sigma ratio / sqrt(1-(n/N)^(2a-1))",
            6,
            f.sigma_ratio / f.predicted_ratio,
            *_band(1.0, abs_=0.02, scale=scale),
            note=f"ratio={f.sigma_ratio:.5f} predicted={f.predicted_ratio:.5f}",
        )
        v.config["runs"].append({"params": p.to_dict(), "seed": seed + i, "normality": rep.to_dict()})
    return v


@_timed
def suite_w_moments(
    params: WalkParams | None = None, N: int = 10**6, m: int = 10_000, seed: int = 1, workers=None, scale=1.0
) -> Verdict:
    """Mean zero, exact variance and two-sided support of the martingale limit."""
    params = params or WalkParams(0.75)
    w = estimate_W(params, N, m, seed, workers)
    s = w.summary()["w_raw"]
    k = 3.0 * scale
    v = Verdict("w-moments", config={"params": params.to_dict(), "N": N, "m": m, "seed": seed, "scale": scale})
    v.add("mean of W_raw [SE units]", 7, s["mean"] / s["se_mean"], -k, k)
    v.add(
        "var of W_raw minus sum E[d_k^2] [SE units]",
        7,
        (s["var"] - w.var_target) / s["se_var"],
        -k,
        k,
        note=f"var={s['var']:.5f} target={w.var_target:.5f}",
    )
    v.add("P(W_raw > 0)", 7, float(np.mean(w.w_raw > 0)), 0.05, 1.0)
    v.add("P(W_raw < 0)", 7, float(np.mean(w.w_raw < 0)), 0.05, 1.0)
    return v


@_timed
def suite_decaying_bias(
    params: WalkParams | None = None, N: int = 10**6, m: int = 10_000, seed: int = 1, workers=None, scale=1.0
) -> Verdict:
    """Mean of ``S_N / N^alpha`` against the series constant in case c."""
    params = params or WalkParams(0.75, 0.0, BiasSchedule.power_law(0.8))
    if params.schedule.kind != "power":
        raise ParameterError("decaying-bias suite needs a power-law schedule")
    w = estimate_W(params, N, m, seed, workers)
    s = w.summary()["w_hat"]
    c = drift_constant(params.alpha, params.beta, params.schedule.gamma)
    floor = params.beta / special.gamma(params.alpha + 1.0)
    k = 3.0 * scale
    v = Verdict("decaying-bias", config={"params": params.to_dict(), "N": N, "m": m, "seed": seed, "scale": scale})
    v.add("mean of S_N/N^alpha minus C [SE units]", 9, (s["mean"] - c) / s["se_mean"], -k, k, note=f"C={c:.6f}")
    v.add("mean of S_N/N^alpha minus beta/Gamma(alpha+1)", 9, s["mean"] - floor, math.ulp(0.0), math.inf)
    v.add("C minus beta/Gamma(alpha+1)", 9, c - floor, math.ulp(0.0), math.inf)
    return v


@_timed
def suite_lil(n_max: int = 10**7, seeds=LIL_SEEDS, workers=None, scale=1.0) -> Verdict:
    """Iterated-logarithm records (diagnostic) plus the simple-walk band.

    Records are produced for ``alpha = 0, 0.5, 0.75``. The only gated
    quantities are finiteness and the calibration band at ``alpha = 0``:
    at least ``LIL_MIN_INSIDE`` of the seeds must have
    ``max_{n >= LIL_START} |S_n| / phi(n)`` inside ``LIL_BAND``.
    """
    v = Verdict("lil", config={"n_max": n_max, "seeds": list(seeds), "scale": scale, "records": {}})
    for a in (0.0, 0.5, 0.75):
        recs = lil_diagnostic(WalkParams(a), n_max, seeds, n_start=LIL_START, workers=workers)
        finite = all(np.all(np.isfinite(r.plus_max)) and np.all(np.isfinite(r.minus_max)) for r in recs)
        v.add(f"alpha={a:g}: records finite", 10, float(finite), 1.0, 1.0)
        v.config["records"][f"{a:g}"] = {
            name: [float(max(r.plus_max[k, -1], r.minus_max[k, -1])) for r in recs]
            for k, name in enumerate(recs[0].normalizations)
        }
        if a == 0.0:
            lo, hi = _band(sum(LIL_BAND) / 2, abs_=(LIL_BAND[1] - LIL_BAND[0]) / 2, scale=scale)
            inside = sum(lo <= r.final() <= hi for r in recs)
            v.add(
                "alpha=0: seeds with max |S_n|/phi(n) in band",
                10,
                float(inside),
                float(LIL_MIN_INSIDE),
                float(len(recs)),
                note=f"band=[{lo:g}, {hi:g}]",
            )
    return v


SUITES = {
    "exact": suite_exact,
    "phase": suite_phase,
    "diffusive": suite_diffusive,
    "critical": suite_critical,
    "supercritical": suite_supercritical,
    "w-moments": suite_w_moments,
    "decaying-bias": suite_decaying_bias,
    "lil": suite_lil,
}
