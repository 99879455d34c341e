import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import special

from erw.model import BiasSchedule, ParameterError, WalkParams
from erw.regimes import (
    REGIME_LABELS,
    classify_regime,
    lil_envelope,
    measure_regime,
    moment_predictions,
)
from erw.sequences import build_tables, drift_constant, drift_second_moment


@pytest.mark.parametrize(
    "alpha, gamma, label",
    [
        (0.4, 0.3, "i-a"),
        (0.7, 0.3, "i-b"),
        (0.9, 0.3, "i-c"),
        (0.25, 0.5, "ii-a"),
        (0.5, 0.5, "ii-b"),
        (0.75, 0.5, "ii-c"),
        (0.2, 0.8, "iii-a"),
        (0.5, 0.8, "iii-b"),
        (0.75, 0.8, "iii-c"),
    ],
)
def test_representative_cells(alpha, gamma, label):
    assert classify_regime(alpha, gamma).regime == label


def test_limit_constants():
    r = classify_regime(0.4, 0.3)
    assert r.limit_kind == "L2-constant" and r.predicted_mean == pytest.approx(2.0)
    assert r.exponent == pytest.approx(0.7)
    r = classify_regime(0.25, 0.5)
    assert r.limit_kind == "Normal"
    assert r.constants == pytest.approx((3.0, 2.0))
    r = classify_regime(0.5, 0.8)
    assert r.normalization == "sqrt(n log n)" and r.constants == (0.0, 1.0)
    r = classify_regime(0.7, 0.3)
    assert r.constants == pytest.approx((0.3,)) and r.log_power == 1.0
    r = classify_regime(0.5, 0.5)
    assert r.constants == (0.5,)
    r = classify_regime(0.2, 0.8)
    assert r.normalize(100.0) == pytest.approx(math.sqrt(100 / 0.6))


def test_case_c_constants():
    r = classify_regime(0.75, 0.8, beta=0.3)
    assert r.limit_kind == "RandomVariable"
    assert r.predicted_mean == pytest.approx(drift_constant(0.75, 0.3, 0.8))
    assert math.isnan(r.predicted_second)
    r2 = classify_regime(0.75, 0.8, second_moment=True)
    assert r2.predicted_second == pytest.approx(drift_second_moment(0.75, 0.0, 0.8))
    assert r2.predicted_second > r2.predicted_mean**2


def test_boundaries_within_tolerance():
    assert classify_regime(0.3, 0.5 + 5e-13).regime == "ii-a"
    assert classify_regime(0.3, 0.5 + 1e-9).regime == "iii-a"
    assert classify_regime(0.5 - 5e-13, 0.9).regime == "iii-b"
    assert classify_regime(1 - 0.35, 0.35).regime == "i-b"


def test_total_on_grid():
    alphas = np.linspace(0.0, 0.995, 200)
    gammas = np.linspace(0.01, 2.0, 200)
    seen = set()
    for a in alphas:
        for g in gammas:
            r = classify_regime(float(a), float(g))
            assert r.regime in REGIME_LABELS
            seen.add(r.regime)
    assert {"i-a", "i-c", "iii-a", "iii-c"} <= seen


@given(st.floats(0.0, 0.99), st.floats(0.01, 2.0))
def test_single_valued(alpha, gamma):
    assert classify_regime(alpha, gamma) == classify_regime(alpha, gamma)


@pytest.mark.parametrize("alpha, gamma", [(1.0, 0.5), (-0.1, 0.5), (0.5, 0.0), (0.5, -1.0), (math.nan, 0.5)])
def test_rejects(alpha, gamma):
    with pytest.raises(ParameterError):
        classify_regime(alpha, gamma)


def test_measure_regime_i_a():
    r = classify_regime(0.4, 0.3)
    t = build_tables(WalkParams(0.4, 0.0, BiasSchedule.power_law(0.3)), 10**6)
    m = measure_regime(r, t)
    assert m["mean"] == pytest.approx(2.0, rel=0.05)
    assert 0 <= m["second"] < 0.05


def test_measure_regime_ii_a_variance():
    r = classify_regime(0.25, 0.5)
    t = build_tables(WalkParams(0.25, 0.0, BiasSchedule.power_law(0.5)), 10**6)
    assert measure_regime(r, t)["second"] == pytest.approx(2.0, rel=0.02)


# --- envelopes --------------------------------------------------------------


def test_envelope_values():
    ee = math.exp(math.e)
    assert lil_envelope(ee, "phi") == pytest.approx(math.sqrt(2 * ee))
    assert lil_envelope(math.e, "phi_hat") == 0.0
    t = math.exp(-math.e)
    assert lil_envelope(t, "phi_hat") == pytest.approx(math.sqrt(2 * t))


@given(st.floats(math.exp(math.e), 1e300), st.floats(1.0001, 10.0))
def test_phi_over_sqrt_increasing(t, factor):
    u = min(t * factor, 1e300)
    assert lil_envelope(u) / math.sqrt(u) >= lil_envelope(t) / math.sqrt(t) * (1 - 1e-14)


@pytest.mark.parametrize("t, variant", [(2.0, "phi"), (1.0, "phi_hat"), (2.0, "phi_hat"), (0.0, "phi"), (-1.0, "phi_hat"), (math.inf, "phi"), (10.0, "psi")])
def test_envelope_domain(t, variant):
    with pytest.raises(ParameterError):
        lil_envelope(t, variant)


# --- moment predictions -----------------------------------------------------


def test_moment_predictions():
    p = moment_predictions(WalkParams(0.2))
    assert p.var_limit == pytest.approx(1 / 0.6) and p.var_exponent == 1.0
    p = moment_predictions(WalkParams(0.5, 0.0, BiasSchedule.constant(0.4)))
    assert p.var_log_power == 1.0 and p.var_limit == pytest.approx(0.84)
    assert p.mean_limit == 0.4 and p.mean_exponent == 1.0
    p = moment_predictions(WalkParams(0.3, 0.6))
    assert p.mean_limit == pytest.approx(0.6 / special.gamma(1.3))
    with pytest.raises(ParameterError):
        moment_predictions(WalkParams(0.75))
    t = build_tables(WalkParams(0.75), 10**5)
    p = moment_predictions(WalkParams(0.75), t)
    assert p.var_exponent == 1.5
    n = 10**5
    assert t.variance[n] / p.var_scale(n) == pytest.approx(p.var_limit, rel=0.02)
