"""Phase classification under a power-law bias and asymptotic predictors."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import ParameterError, WalkParams
from .sequences import BOUNDARY_TOL, SequenceTables, drift_constant, drift_second_moment, mean_asymptote

REGIME_LABELS = tuple(f"{g}-{a}" for g in ("i", "ii", "iii") for a in ("a", "b", "c"))


@dataclass(frozen=True)
class RegimeReport:
    """One cell of the (alpha, gamma) phase table.

    The scaling sequence is ``scale * n^exponent * (log n)^log_power``.
    ``limit_kind`` is ``"L2-constant"`` (``constants = (c,)``),
    ``"Normal"`` (``constants = (mean, variance)``) or ``"RandomVariable"``
    (``constants = (E[W_hat], E[W_hat^2])``; the second entry is NaN unless
    requested).
    """

    alpha: float
    gamma: float
    regime: str
    normalization: str
    limit_kind: str
    constants: tuple[float, ...]
    exponent: float
    log_power: float = 0.0
    scale: float = 1.0
    beta: float = 0.0
    measured: dict = field(default_factory=dict, compare=False)

    def normalize(self, n):
        """Value of the scaling sequence at ``n``."""
        n = np.asarray(n, dtype=float)
        return self.scale * n**self.exponent * np.log(n) ** self.log_power

    @property
    def predicted_mean(self) -> float:
        return self.constants[0]

    @property
    def predicted_second(self) -> float:
        """Predicted variance (Normal) or second moment (RandomVariable); NaN otherwise."""
        return self.constants[1] if len(self.constants) > 1 else math.nan

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "gamma": self.gamma,
            "beta": self.beta,
            "regime": self.regime,
            "normalization": self.normalization,
            "limit_kind": self.limit_kind,
            "constants": list(self.constants),
            "exponent": self.exponent,
            "log_power": self.log_power,
            "scale": self.scale,
        }


def _near(x, y):
    return abs(x - y) <= BOUNDARY_TOL


def classify_regime(alpha: float, gamma: float, beta: float = 0.0, second_moment: bool = False) -> RegimeReport:
    """Classify ``(alpha, gamma)`` for the bias ``eps_n = n^-gamma``.

    Boundaries (within 1e-12): ``gamma = 1/2`` is case ii, ``alpha = 1/2`` is
    sub-case b of cases ii and iii, ``alpha = 1 - gamma`` is case i-b.

    Parameters
    ----------
    beta : float
        Mean of the first step; enters only the c cases through
        ``E[W_hat] = C(alpha, beta, gamma)``.
    second_moment : bool
        Also compute ``E[W_hat^2]`` in the c cases (runs a 1e6-step recursion).
    """
    if not (math.isfinite(alpha) and 0.0 <= alpha < 1.0):
        raise ParameterError(f"alpha must lie in [0, 1), got {alpha}")
    if not (math.isfinite(gamma) and gamma > 0.0):
        raise ParameterError(f"gamma must be > 0, got {gamma}")
    if not -1.0 <= beta <= 1.0:
        raise ParameterError(f"beta must lie in [-1, 1], got {beta}")

    if _near(gamma, 0.5):
        gcase = "ii"
    elif gamma < 0.5:
        gcase = "i"
    else:
        gcase = "iii"

    if gcase == "i":
        edge = 1.0 - gamma
    else:
        edge = 0.5
    if _near(alpha, edge):
        acase = "b"
    elif alpha < edge:
        acase = "a"
    else:
        acase = "c"
    label = f"{gcase}-{acase}"
    common = dict(alpha=alpha, gamma=gamma, beta=beta, regime=label)

    if acase == "c":
        c = drift_constant(alpha, beta, gamma)
        w2 = drift_second_moment(alpha, beta, gamma) if second_moment else math.nan
        return RegimeReport(
            normalization=f"n^{alpha:g}", limit_kind="RandomVariable", constants=(c, w2), exponent=alpha, **common
        )
    if label == "i-a":
        return RegimeReport(
            normalization=f"n^{1 - gamma:g}",
            limit_kind="L2-constant",
            constants=((1.0 - alpha) / (1.0 - gamma - alpha),),
            exponent=1.0 - gamma,
            **common,
        )
    if label == "i-b":
        return RegimeReport(
            normalization=f"n^{alpha:g} log n",
            limit_kind="L2-constant",
            constants=(1.0 - alpha,),
            exponent=alpha,
            log_power=1.0,
            **common,
        )
    if label == "ii-a":
        return RegimeReport(
            normalization="sqrt(n)",
            limit_kind="Normal",
            constants=((2.0 - 2.0 * alpha) / (1.0 - 2.0 * alpha), 1.0 / (1.0 - 2.0 * alpha)),
            exponent=0.5,
            **common,
        )
    if label == "ii-b":
        return RegimeReport(
            normalization="sqrt(n (log n)^2)",
            limit_kind="L2-constant",
            constants=(0.5,),
            exponent=0.5,
            log_power=1.0,
            **common,
        )
    if label == "iii-a":
        return RegimeReport(
            normalization=f"sqrt(n / {1 - 2 * alpha:g})",
            limit_kind="Normal",
            constants=(0.0, 1.0),
            exponent=0.5,
            scale=1.0 / math.sqrt(1.0 - 2.0 * alpha),
            **common,
        )
    # iii-b
    return RegimeReport(
        normalization="sqrt(n log n)",
        limit_kind="Normal",
        constants=(0.0, 1.0),
        exponent=0.5,
        log_power=0.5,
        **common,
    )


def measure_regime(report: RegimeReport, tables: SequenceTables, n: int | None = None) -> dict:
    """Recursion-measured counterparts of the predicted constants at time ``n``."""
    n = tables.n_max if n is None else n
    norm = float(report.normalize(n))
    mean = float(tables.mean[n])
    second = float(tables.second_moment[n])
    out = {"n": n, "mean": mean / norm}
    if report.limit_kind == "Normal":
        out["second"] = (second - mean * mean) / norm**2
    elif report.limit_kind == "RandomVariable":
        out["second"] = second / norm**2
    else:
        # E[(S_n/norm - c)^2]
        c = report.predicted_mean
        out["second"] = second / norm**2 - 2.0 * c * mean / norm + c * c
    return out


def lil_envelope(t: float, variant: str = "phi") -> float:
    """Iterated-logarithm envelopes.

    ``phi(t) = sqrt(2 t log log t)`` needs ``t >= e``;
    ``phi_hat(t) = sqrt(2 t log|log t|)`` needs ``t > 0`` and ``|log t| >= 1``.
    Both are 0 on the boundary of their domain.
    """
    if not math.isfinite(t) or t <= 0:
        raise ParameterError(f"envelope argument must be positive and finite, got {t}")
    if variant == "phi":
        inner = math.log(t)
        if inner < 1.0:
            raise ParameterError(f"phi needs t >= e, got {t}")
    elif variant == "phi_hat":
        inner = abs(math.log(t))
        if inner < 1.0:
            raise ParameterError(f"phi_hat needs |log t| >= 1, got {t}")
    else:
        raise ParameterError(f"unknown envelope {variant!r}")
    return math.sqrt(2.0 * t * max(math.log(inner), 0.0))


@dataclass(frozen=True)
class MomentPrediction:
    """Scalings used in the ``moments`` table.

    ``E[S_n] / mean_scale(n) -> mean_limit`` and
    ``Var(S_n) / var_scale(n) -> var_limit``.
    """

    mean_label: str
    mean_exponent: float
    mean_log_power: float
    mean_limit: float
    var_label: str
    var_exponent: float
    var_log_power: float
    var_limit: float

    def mean_scale(self, n):
        n = np.asarray(n, dtype=float)
        return n**self.mean_exponent * np.log(n) ** self.mean_log_power

    def var_scale(self, n):
        n = np.asarray(n, dtype=float)
        return n**self.var_exponent * np.log(n) ** self.var_log_power


def moment_predictions(params: WalkParams, tables: SequenceTables | None = None) -> MomentPrediction:
    """Asymptotic scalings of the first two moments for ``params``.

    The variance prediction follows the fluctuation theorems with
    ``eps = lim eps_n``. For ``alpha > 1/2`` it is ``E[W^2] / Gamma(alpha+1)^2``
    with ``E[W^2]`` truncated at the tables' horizon.
    """
    params.require_verifiable()
    alpha, beta, sched = params.alpha, params.beta, params.schedule
    eps = sched.limit
    one_m = 1.0 - eps * eps

    if alpha < 0.5 and not _near(alpha, 0.5):
        var = ("n", 1.0, 0.0, one_m / (1.0 - 2.0 * alpha))
    elif _near(alpha, 0.5):
        var = ("n log n", 1.0, 1.0, one_m)
    else:
        if tables is None or tables.step_var is None:
            raise ParameterError("alpha > 1/2 needs exact tables for the variance prediction")
        w2 = math.fsum(tables.step_var)
        var = (f"n^{2 * alpha:g}", 2.0 * alpha, 0.0, w2 / math.gamma(alpha + 1.0) ** 2)

    if sched.kind == "power":
        ma = mean_asymptote(params)
        label = f"n^{ma.exponent:g}" + (" log n" if ma.log_power else "")
        mean = (label, ma.exponent, float(ma.log_power), ma.constant)
    elif eps != 0.0:
        mean = ("n", 1.0, 0.0, eps)
    else:
        mean = (f"n^{alpha:g}", alpha, 0.0, beta / math.gamma(alpha + 1.0))
    return MomentPrediction(*mean, *var)
