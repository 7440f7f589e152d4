"""Pairwise transmission models: Exp, Pow and Ray.

Every model here factors as ``H = rate * h(dt)`` and ``log S = -rate * g(dt)``
with ``g' = h``, so hazard, log-survival and their rate derivatives are linear
in the rate. The vectorized factors :meth:`HazardModel.hazard_factor` and
:meth:`HazardModel.cumulative_factor` are what the likelihood code uses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

KINDS = ("exp", "pow", "ray")


@dataclass(frozen=True)
class HazardModel:
    """Transmission model.

    Parameters
    ----------
    kind : {"exp", "pow", "ray"}
    delta : float
        Minimum delay of the power-law model. Ignored for the other kinds.
    """

    kind: str = "exp"
    delta: float = 1.0

    def __post_init__(self) -> None:
        kind = self.kind.lower()
        if kind not in KINDS:
            raise ValidationError(f"unknown hazard kind {self.kind!r}; expected one of {KINDS}")
        object.__setattr__(self, "kind", kind)
        if kind == "pow" and not (math.isfinite(self.delta) and self.delta > 0):
            raise ValidationError("pow model needs a finite delta > 0")

    @classmethod
    def exp(cls) -> HazardModel:
        return cls("exp")

    @classmethod
    def pow(cls, delta: float = 1.0) -> HazardModel:
        return cls("pow", delta)

    @classmethod
    def ray(cls) -> HazardModel:
        return cls("ray")

    def hazard_factor(self, dt: np.ndarray) -> np.ndarray:
        """``h(dt)`` with ``H = rate * h``; zero where ``dt <= 0`` (or ``dt <= delta`` for pow)."""
        dt = np.asarray(dt, dtype=float)
        if self.kind == "exp":
            return np.where(dt > 0, 1.0, 0.0)
        if self.kind == "ray":
            return np.where(dt > 0, dt, 0.0)
        live = dt > self.delta
        return np.where(live, 1.0 / np.where(live, dt, 1.0), 0.0)

    def cumulative_factor(self, dt: np.ndarray) -> np.ndarray:
        """``g(dt) = integral of h`` so that ``log S = -rate * g``; zero for ``dt <= 0``."""
        dt = np.asarray(dt, dtype=float)
        if self.kind == "exp":
            return np.where(dt > 0, dt, 0.0)
        if self.kind == "ray":
            return np.where(dt > 0, 0.5 * dt * dt, 0.0)
        live = dt > self.delta
        return np.where(live, np.log(np.where(live, dt, self.delta) / self.delta), 0.0)


def _check_finite(*values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise ValidationError(f"non-finite input {v!r}")


def hazard(model: HazardModel, rate: float, dt: float) -> float:
    """Instantaneous transmission rate ``H`` after a lag ``dt``."""
    _check_finite(rate, dt)
    if rate < 0:
        raise ValidationError("rate must be nonnegative")
    return float(rate * model.hazard_factor(dt))


def log_survival(model: HazardModel, rate: float, dt: float) -> float:
    """``ln S``: log-probability that transmission has not happened within ``dt``."""
    _check_finite(rate, dt)
    if rate < 0 or dt < 0:
        raise ValidationError("rate and dt must be nonnegative")
    g = float(model.cumulative_factor(dt))
    return -rate * g if g != 0.0 else 0.0


def log_density(model: HazardModel, rate: float, dt: float) -> float:
    """``ln f = ln H + ln S``; ``-inf`` where the hazard vanishes."""
    h = hazard(model, rate, dt)
    if h <= 0.0:
        return -math.inf
    return math.log(h) + log_survival(model, rate, dt)


def _inverse_survival(model: HazardModel, rate: np.ndarray, u: np.ndarray) -> np.ndarray:
    # solve S(dt) = u for dt; u in (0, 1]
    neg_log_u = -np.log(u)
    if model.kind == "exp":
        return neg_log_u / rate
    if model.kind == "ray":
        return np.sqrt(2.0 * neg_log_u / rate)
    return model.delta * np.exp(neg_log_u / rate)


def sample_delays(model: HazardModel, rates: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Draw one transmission delay per rate by inverse transform.

    Absent edges (``rate == 0``) never transmit and get ``inf``. One uniform is
    drawn per entry, including absent edges, so the stream consumption depends
    only on the shape of ``rates``.
    """
    rates = np.asarray(rates, dtype=float)
    u = 1.0 - rng.random(rates.shape)  # (0, 1]
    out = np.full(rates.shape, np.inf)
    live = rates > 0
    if np.any(live):
        out[live] = _inverse_survival(model, rates[live], u[live])
    return out


def sample_delay(model: HazardModel, rate: float, rng: np.random.Generator | None = None,
                 u: float | None = None) -> float:
    """Scalar sampler; ``u`` forces the uniform draw (for exact checks)."""
    _check_finite(rate)
    if rate < 0:
        raise ValidationError("rate must be nonnegative")
    if rate == 0:
        return math.inf
    if u is None:
        if rng is None:
            raise ValidationError("need an rng or a forced uniform u")
        u = 1.0 - rng.random()
    return float(_inverse_survival(model, np.asarray(rate, dtype=float), np.asarray(u, dtype=float)))
