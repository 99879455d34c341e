"""Walk parameters and bias schedules.

A walk is specified by the reinforcement strength ``alpha``, the mean of the
first step ``beta`` and a bias schedule ``eps_n`` that drives the non-memory
part of step ``n + 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

SCHEDULE_KINDS = ("zero", "constant", "power", "custom")


class ParameterError(ValueError):
    """Raised for parameters outside the model's domain."""


@dataclass(frozen=True)
class BiasSchedule:
    """Time-dependent bias ``eps_n`` for ``n >= 1``.

    ``eps_0`` is defined as 0 so that sums starting at index 0 pick up no
    contribution from the (empty) walk at time 0.

    Parameters
    ----------
    kind : {"zero", "constant", "power", "custom"}
    value : float
        ``eps`` for ``constant``, the decay exponent ``gamma`` for ``power``.
    values : tuple of float
        Explicit ``eps_1, ..., eps_K`` for ``custom``; the last entry is held
        for ``n > K``.
    """

    kind: str = "zero"
    value: float = 0.0
    values: tuple[float, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise ParameterError(f"unknown schedule kind {self.kind!r}")
        if not math.isfinite(self.value):
            raise ParameterError("schedule parameter must be finite")
        if self.kind == "constant" and not -1.0 <= self.value <= 1.0:
            raise ParameterError(f"constant bias {self.value} outside [-1, 1]")
        if self.kind == "power" and self.value <= 0:
            raise ParameterError(f"power-law exponent must be > 0, got {self.value}")
        if self.kind == "custom":
            if len(self.values) == 0:
                raise ParameterError("custom schedule needs at least one value")
            vals = np.asarray(self.values, dtype=float)
            if not np.all(np.isfinite(vals)) or np.any(np.abs(vals) > 1.0):
                raise ParameterError("custom bias values must lie in [-1, 1]")
            object.__setattr__(self, "values", tuple(float(v) for v in vals))

    @classmethod
    def zero(cls) -> "BiasSchedule":
        return cls("zero")

    @classmethod
    def constant(cls, eps: float) -> "BiasSchedule":
        return cls("constant", float(eps))

    @classmethod
    def power_law(cls, gamma: float) -> "BiasSchedule":
        return cls("power", float(gamma))

    @classmethod
    def custom(cls, values: Sequence[float]) -> "BiasSchedule":
        return cls("custom", 0.0, tuple(values))

    @property
    def gamma(self) -> float:
        if self.kind != "power":
            raise ParameterError(f"schedule {self.kind!r} has no decay exponent")
        return self.value

    @property
    def limit(self) -> float:
        """``lim eps_n``."""
        if self.kind == "constant":
            return self.value
        if self.kind == "custom":
            return self.values[-1]
        return 0.0

    def at(self, n: int) -> float:
        """Scalar ``eps_n``; ``eps_0 = 0``."""
        if n < 0:
            raise ParameterError("schedule index must be >= 0")
        if n == 0:
            return 0.0
        if self.kind == "zero":
            return 0.0
        if self.kind == "constant":
            return self.value
        if self.kind == "power":
            return float(n) ** (-self.value)
        return self.values[min(n, len(self.values)) - 1]

    def table(self, n_max: int) -> np.ndarray:
        """Array ``[eps_0, eps_1, ..., eps_{n_max}]``."""
        out = np.zeros(n_max + 1)
        if n_max < 1 or self.kind == "zero":
            return out
        if self.kind == "constant":
            out[1:] = self.value
        elif self.kind == "power":
            out[1:] = np.arange(1, n_max + 1, dtype=float) ** (-self.value)
        else:
            vals = np.asarray(self.values)
            k = min(len(vals), n_max)
            out[1 : k + 1] = vals[:k]
            out[k + 1 :] = vals[-1]
        return out

    def is_verifiable(self) -> bool:
        """Theorem hypotheses: ``eps_n`` in [0, 1] and ``lim eps_n < 1``."""
        if self.kind == "constant":
            return 0.0 <= self.value < 1.0
        if self.kind == "custom":
            vals = np.asarray(self.values)
            return bool(np.all(vals >= 0.0) and vals[-1] < 1.0)
        return True

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind in ("constant", "power"):
            d["value"] = self.value
        if self.kind == "custom":
            d["values"] = list(self.values)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "BiasSchedule":
        return cls(d.get("kind", "zero"), float(d.get("value", 0.0)), tuple(d.get("values", ())))

    def __str__(self):
        if self.kind == "zero":
            return "eps=0"
        if self.kind == "constant":
            return f"eps={self.value:g}"
        if self.kind == "power":
            return f"eps=n^-{self.value:g}"
        return f"eps=custom[{len(self.values)}]"


@dataclass(frozen=True)
class WalkParams:
    """Full model specification.

    ``alpha = 1`` is accepted for simulation only; exact asymptotics and the
    verification suites need ``alpha < 1``.
    """

    alpha: float
    beta: float = 0.0
    schedule: BiasSchedule = field(default_factory=BiasSchedule.zero)

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and 0.0 <= self.alpha <= 1.0):
            raise ParameterError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not (math.isfinite(self.beta) and -1.0 <= self.beta <= 1.0):
            raise ParameterError(f"beta must lie in [-1, 1], got {self.beta}")
        if not isinstance(self.schedule, BiasSchedule):
            raise ParameterError("schedule must be a BiasSchedule")

    @property
    def p(self) -> float:
        """Probability of repeating (rather than flipping) a remembered step."""
        return 0.5 * (1.0 + self.alpha)

    @property
    def q(self) -> float:
        """Probability that the first step is +1."""
        return 0.5 * (1.0 + self.beta)

    def require_verifiable(self) -> None:
        """Raise unless the limit theorems' hypotheses hold."""
        if self.alpha >= 1.0:
            raise ParameterError("alpha = 1 is excluded from verification")
        if not self.schedule.is_verifiable():
            raise ParameterError(
                "verification needs eps_n in [0, 1] with lim eps_n < 1, got " + str(self.schedule)
            )

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "beta": self.beta, "schedule": self.schedule.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "WalkParams":
        return cls(float(d["alpha"]), float(d.get("beta", 0.0)), BiasSchedule.from_dict(d.get("schedule", {})))
