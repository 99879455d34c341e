import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from erw import ensemble as ens
from erw.ensemble import (
    EnsembleStats,
    estimate_W,
    fluctuation_scale,
    geometric_grid,
    lil_diagnostic,
    merge_tree,
    run_ensemble,
    supercritical_fluctuation,
)
from erw.model import BiasSchedule, ParameterError, WalkParams
from erw.regimes import lil_envelope
from erw.sampler import simulate
from erw.sequences import build_tables, exact_mean

# --- mergeable statistics ---------------------------------------------------

samples_st = st.lists(
    st.lists(st.floats(-1e4, 1e4, allow_subnormal=False), min_size=3, max_size=3), min_size=2, max_size=60
)


def _close(a: EnsembleStats, b: EnsembleStats):
    assert a.count == b.count
    np.testing.assert_allclose(a.mean, b.mean, rtol=1e-9, atol=1e-9)
    scale = max(1.0, float(np.max(b.m2)))
    np.testing.assert_allclose(a.m2, b.m2, rtol=1e-9, atol=1e-9 * scale)
    np.testing.assert_allclose(a.m3, b.m3, rtol=1e-7, atol=1e-9 * scale**1.5)
    np.testing.assert_allclose(a.m4, b.m4, rtol=1e-7, atol=1e-9 * scale**2)


@given(samples_st, st.data())
def test_merge_equals_single_pass(rows, data):
    x = np.array(rows)
    ck = [1, 2, 3]
    cut = data.draw(st.integers(0, len(rows)))
    merged = EnsembleStats.from_samples(ck, x[:cut]).merge(EnsembleStats.from_samples(ck, x[cut:]))
    _close(merged, EnsembleStats.from_samples(ck, x))


@given(samples_st, st.data())
def test_merge_order_independent(rows, data):
    x = np.array(rows)
    ck = [1, 2, 3]
    cuts = sorted(data.draw(st.lists(st.integers(0, len(rows)), min_size=2, max_size=2)))
    parts = [EnsembleStats.from_samples(ck, p) for p in np.split(x, cuts)]
    left = parts[0].merge(parts[1]).merge(parts[2])
    right = parts[2].merge(parts[0].merge(parts[1]))
    _close(left, right)
    _close(merge_tree(parts), EnsembleStats.from_samples(ck, x))


def test_single_trajectory_stats():
    st_ = EnsembleStats.from_samples([5, 9], np.array([[3, -1]]))
    assert st_.count == 1
    np.testing.assert_array_equal(st_.mean, [3, -1])
    assert np.all(np.isnan(st_.var))


def test_merge_validation_and_identity():
    a = EnsembleStats.from_samples([1], np.arange(10.0))
    assert a.merge(EnsembleStats.empty([1])) is a
    with pytest.raises(ParameterError):
        a.merge(EnsembleStats.empty([2]))
    with pytest.raises(ParameterError):
        merge_tree([])


def test_moment_values():
    x = np.random.default_rng(0).standard_normal(1000) * 2 + 1
    s = EnsembleStats.from_samples([1], x)
    assert s.var[0] == pytest.approx(np.var(x, ddof=1))
    assert s.se_mean[0] == pytest.approx(np.std(x, ddof=1) / math.sqrt(1000))
    d = x - x.mean()
    assert s.skew[0] == pytest.approx(np.mean(d**3) / np.mean(d**2) ** 1.5)
    assert s.excess_kurtosis[0] == pytest.approx(np.mean(d**4) / np.mean(d**2) ** 2 - 3)
    assert set(s.rows()[0]) == {"n", "count", "mean", "var", "skew", "kurt", "se_mean"}


def test_geometric_grid():
    g = geometric_grid(100)
    assert g[0] == 1 and g[-1] == 100 and np.all(np.diff(g) > 0)
    assert set(g) >= {1, 2, 3, 5, 7, 11, 17, 25, 38, 57, 86}
    with pytest.raises(ParameterError):
        geometric_grid(10, ratio=1.0)


# --- ensemble runner --------------------------------------------------------

P = WalkParams(0.7, 0.2, BiasSchedule.power_law(0.6))


def test_trajectories_match_simulate():
    ck = [1, 10, 1000, 3000]
    res = run_ensemble(P, 3000, ck, 40, seed=5, workers=1, block=7)
    for i in (0, 6, 7, 39):
        np.testing.assert_array_equal(res.positions[i], simulate(P, 3000, ck, 5, i).positions)
    assert res.stats.count == 40


def test_worker_count_invariance():
    ck = geometric_grid(2000)
    a = run_ensemble(P, 2000, ck, 300, seed=8, workers=1, block=32)
    b = run_ensemble(P, 2000, ck, 300, seed=8, workers=3, block=32)
    c = run_ensemble(P, 2000, ck, 300, seed=8, workers=2, block=50)
    np.testing.assert_array_equal(a.positions, b.positions)
    np.testing.assert_array_equal(a.stats.m4, b.stats.m4)
    np.testing.assert_array_equal(a.positions, c.positions)
    np.testing.assert_allclose(a.stats.var, c.stats.var, rtol=1e-9)


def test_env_worker_default(monkeypatch):
    monkeypatch.setenv(ens.WORKERS_ENV, "3")
    assert ens.default_workers() == 3


def test_worker_failure_surfaces(monkeypatch):
    real = ens.run_stream

    def flaky(params, eps, n_max, ck, bitgen):
        if flaky.calls == 5:
            raise RuntimeError("boom")
        flaky.calls += 1
        return real(params, eps, n_max, ck, bitgen)

    flaky.calls = 0
    monkeypatch.setattr(ens, "run_stream", flaky)
    with pytest.raises(RuntimeError, match="boom"):
        run_ensemble(P, 100, [100], 20, seed=1, workers=2, block=4)


def test_m_validation():
    with pytest.raises(ParameterError):
        run_ensemble(P, 10, [10], 0, seed=1)


def test_simple_walk_variance():
    res = run_ensemble(WalkParams(0.0), 10_000, [10_000], 100_000, seed=31)
    assert 0.97 <= res.stats.var[0] / 10_000 <= 1.03


def test_diffusive_variance_matches_recursion():
    p = WalkParams(0.2)
    n = 10_000
    res = run_ensemble(p, n, [n], 50_000, seed=32)
    t = build_tables(p, n)
    assert res.stats.var[0] == pytest.approx(t.variance[n], rel=0.03)


# --- fluctuation statistic --------------------------------------------------


def test_sigma_ratio_deterministic():
    p = WalkParams(0.75)
    sigma, asym = fluctuation_scale(p, 10_000, 200_000)
    assert sigma / asym == pytest.approx(math.sqrt(1 - 0.05**0.5), rel=0.02)


def test_sigma_matches_window_definition():
    p = WalkParams(0.6, 0.0, BiasSchedule.constant(0.3))
    t = build_tables(p, 5000)
    sigma, asym = fluctuation_scale(p, 200, 5000, t)
    assert sigma**2 == pytest.approx(math.exp(2 * t.log_a[200]) * math.fsum(t.step_var[201:]), rel=1e-12)
    assert asym == pytest.approx(math.sqrt(0.91 * 200 / 0.2))


@pytest.mark.parametrize("alpha", [0.6, 0.75, 0.9])
def test_unit_variance_identity(alpha):
    m = 4000
    f = supercritical_fluctuation(WalkParams(alpha), 500, 10_000, m, seed=40)
    t = f.t_values
    assert abs(t.mean()) < 3 / math.sqrt(m)
    se_var = math.sqrt(2.0 / m)
    assert abs(t.var(ddof=1) - 1.0) < 3 * se_var


def test_fluctuation_default_horizon_and_statistic():
    p = WalkParams(0.8, 0.0, BiasSchedule.power_law(0.5))
    f = supercritical_fluctuation(p, 100, m=50, seed=2)
    assert f.N == 2000
    t = build_tables(p, 2000)
    a_n, a_N = math.exp(t.log_a[100]), math.exp(t.log_a[2000])
    ref = (f.s_n - t.mean[100] - (f.s_N - t.mean[2000]) / a_N * a_n) / f.sigma
    np.testing.assert_allclose(f.t_values, ref, rtol=1e-12)


@pytest.mark.parametrize(
    "params, n, N",
    [(WalkParams(0.5), 10, 100), (WalkParams(1.0), 10, 100), (WalkParams(0.3), 10, 100), (WalkParams(0.7), 100, 100)],
)
def test_fluctuation_rejects(params, n, N):
    with pytest.raises(ParameterError):
        supercritical_fluctuation(params, n, N, 10, seed=0)


# --- W estimates ------------------------------------------------------------


def test_w_estimates_small():
    p = WalkParams(0.75)
    m = 4000
    w = estimate_W(p, 5000, m, seed=50)
    s = w.summary()["w_raw"]
    assert abs(s["mean"]) < 3 * s["se_mean"]
    assert abs(s["var"] - w.var_target) < 3 * s["se_var"]
    assert w.w_hat_mean_limit == 0.0
    t = build_tables(p, 5000)
    assert w.var_target == pytest.approx(t.martingale_variance[5000], rel=1e-9)


def test_w_estimates_rejects():
    with pytest.raises(ParameterError):
        estimate_W(WalkParams(0.5), 100, 10)
    with pytest.raises(ParameterError):
        estimate_W(WalkParams(0.6, 0.0, BiasSchedule.power_law(0.3)), 100, 10)


# --- iterated-logarithm diagnostic ------------------------------------------


def test_lil_record_matches_direct_computation():
    p = WalkParams(0.3, 0.0, BiasSchedule.constant(0.2))
    n = 20_000
    rec = lil_diagnostic(p, n, [7], n_start=100, workers=1)[0]
    path = simulate(p, n, np.arange(1, n + 1), seed=7).positions
    mean = exact_mean(p, n)
    k = np.arange(100, n + 1)
    env = np.array([lil_envelope(0.96 * kk / 0.4) for kk in k])
    r = (path[k - 1] - mean[k]) / env
    assert rec.plus_max[0, -1] == pytest.approx(r.max(), rel=1e-12)
    assert rec.minus_max[0, -1] == pytest.approx((-r).max(), rel=1e-12)
    assert rec.times[-1] == n


def test_lil_records_shape_and_monotone():
    recs = lil_diagnostic(WalkParams(0.75), 200_000, [1, 2], n_start=100, workers=2)
    for r in recs:
        assert r.normalizations == ("theorem", "tail")
        assert r.times[-1] == 10_000
        assert np.all(np.isfinite(r.plus_max)) and np.all(np.isfinite(r.minus_max))
        assert np.all(np.diff(r.plus_max, axis=1) >= 0)
        assert math.isfinite(r.w_proxy)
        assert len(r.rows()) == 2 * r.times.size
    crit = lil_diagnostic(WalkParams(0.5), 50_000, [3], workers=1)[0]
    assert crit.normalizations == ("phi",) and np.all(np.isfinite(crit.plus_max))
