"""Hypotheses, datasets and conjugate posterior updates."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .stats_dist import BetaParams, GammaParams, PiecewiseHazard, cumulative_hazard

__all__ = [
    "Direction",
    "Hypothesis",
    "ScenarioLabel",
    "ScenarioSpec",
    "BinaryDataset",
    "SurvivalDataset",
    "PilotData",
    "ErrorRequirements",
    "beta_posterior",
    "power_prior_posterior",
    "piecewise_posterior",
    "recurrence_hazard",
    "derive_xi",
    "survival_prob",
    "RECURRENCE_CUTPOINTS",
    "RECURRENCE_BASE_RATES",
    "RECURRENCE_HORIZON",
]


class Direction(str, enum.Enum):
    """Direction of the alternative hypothesis relative to ``theta0``."""

    GREATER = "GREATER"
    LESS = "LESS"


@dataclass(frozen=True)
class Hypothesis:
    """One-sided test of ``theta0``; ``direction`` names the alternative."""

    theta0: float
    direction: Direction = Direction.GREATER

    def __post_init__(self):
        object.__setattr__(self, "direction", Direction(self.direction))

    def is_null(self, theta: float) -> bool:
        if self.direction is Direction.GREATER:
            return theta <= self.theta0
        return theta >= self.theta0


class ScenarioLabel(str, enum.Enum):
    NULL_BOUNDARY = "NULL_BOUNDARY"
    ALTERNATIVE = "ALTERNATIVE"
    CUSTOM = "CUSTOM"


@dataclass(frozen=True)
class ScenarioSpec:
    """Point-mass sampling prior: the true data-generating parameter(s)."""

    true_params: tuple
    label: ScenarioLabel = ScenarioLabel.CUSTOM

    def __post_init__(self):
        params = self.true_params
        if np.isscalar(params):
            params = (params,)
        params = tuple(float(p) for p in params)
        if not params:
            raise ValueError("a scenario needs at least one true parameter")
        object.__setattr__(self, "true_params", params)
        object.__setattr__(self, "label", ScenarioLabel(self.label))

    @property
    def theta(self) -> float:
        if len(self.true_params) != 1:
            raise ValueError("scenario has several endpoints; use true_params")
        return self.true_params[0]


@dataclass(frozen=True)
class BinaryDataset:
    n: int
    x: int

    def __post_init__(self):
        if self.n < 0 or not 0 <= self.x <= self.n:
            raise ValueError(f"need 0 <= x <= n, got x={self.x}, n={self.n}")

    def __add__(self, other: "BinaryDataset") -> "BinaryDataset":
        return BinaryDataset(self.n + other.n, self.x + other.x)


@dataclass(frozen=True)
class SurvivalDataset:
    """Right-censored time-to-event records (weeks).

    ``events[i]`` is False when subject ``i`` was censored at ``times[i]``.
    """

    times: np.ndarray
    events: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float).reshape(-1)
        e = np.asarray(self.events, dtype=bool).reshape(-1)
        if t.shape != e.shape:
            raise ValueError("times and events must have the same length")
        if np.any(~(t > 0)) or not np.all(np.isfinite(t)):
            raise ValueError("survival times must be positive and finite")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "events", e)

    @classmethod
    def from_records(cls, records) -> "SurvivalDataset":
        records = list(records)
        if not records:
            return cls(np.empty(0), np.empty(0, dtype=bool))
        t, e = zip(*records)
        return cls(np.array(t, dtype=float), np.array(e, dtype=bool))

    def __len__(self) -> int:
        return self.times.size

    def concat(self, other: "SurvivalDataset") -> "SurvivalDataset":
        return SurvivalDataset(
            np.concatenate([self.times, other.times]), np.concatenate([self.events, other.events])
        )


@dataclass(frozen=True)
class PilotData:
    n0: int
    x0: int

    def __post_init__(self):
        if self.n0 < 0 or not 0 <= self.x0 <= self.n0:
            raise ValueError(f"need 0 <= x0 <= n0, got x0={self.x0}, n0={self.n0}")


@dataclass(frozen=True)
class ErrorRequirements:
    """Type I error bound ``alpha`` and type II error bound ``beta``."""

    alpha: float = 0.025
    beta: float = 0.2

    def __post_init__(self):
        # closed upper end lets callers express "no requirement"
        if not (0 < self.alpha <= 1 and 0 < self.beta <= 1):
            raise ValueError("alpha and beta must lie in (0, 1]")

    @property
    def power(self) -> float:
        return 1.0 - self.beta


# ---------------------------------------------------------------------------
# conjugate updates
# ---------------------------------------------------------------------------


def beta_posterior(prior: BetaParams, data: BinaryDataset) -> BetaParams:
    return BetaParams(prior.alpha + data.x, prior.beta + data.n - data.x)


DEFAULT_INITIAL_PRIOR = BetaParams(0.01, 0.01)


def power_prior_posterior(
    initial: BetaParams | None,
    pilot: PilotData,
    a0: float,
    data: BinaryDataset,
) -> BetaParams:
    """Posterior under a power prior that discounts ``pilot`` by ``a0``.

    The pilot likelihood raised to ``a0`` is conjugate to the beta initial
    prior (``Beta(0.01, 0.01)`` when ``initial`` is None).
    """
    if not 0 <= a0 <= 1:
        raise ValueError(f"a0 must lie in [0, 1], got {a0}")
    initial = initial or DEFAULT_INITIAL_PRIOR
    return BetaParams(
        data.x + a0 * pilot.x0 + initial.alpha,
        data.n - data.x + a0 * (pilot.n0 - pilot.x0) + initial.beta,
    )


def _interval_stats(edges: np.ndarray, times: np.ndarray, events: np.ndarray):
    """Events and exposure per interval.

    Intervals are ``[0, e1], (e1, e2], ...``; a subject contributes exposure to
    every interval it traverses before its event or censoring time.
    """
    exposure = np.clip(times[..., None] - edges[:-1], 0.0, np.diff(edges)).sum(axis=-2)
    # searchsorted(side="left") sends t == e_j into interval j-1, i.e. (e_{j-1}, e_j]
    idx = np.clip(np.searchsorted(edges, times, side="left") - 1, 0, edges.size - 2)
    counts = np.bincount(idx[events], minlength=edges.size - 1)
    return counts, exposure


def piecewise_posterior(
    prior: GammaParams | Sequence[GammaParams],
    data: SurvivalDataset,
    layout: PiecewiseHazard,
) -> list[GammaParams]:
    """Per-interval gamma posterior for a piecewise-exponential model.

    Interval ``j`` gets ``(shape + d_j, rate + T_j)`` where ``d_j`` counts its
    events and ``T_j`` is the total exposure accrued in it.
    """
    J = layout.n_intervals
    priors = [prior] * J if isinstance(prior, GammaParams) else list(prior)
    if len(priors) != J:
        raise ValueError(f"expected {J} interval priors, got {len(priors)}")
    if len(data) and data.times.max() > layout.horizon:
        raise ValueError("survival times exceed the layout horizon")
    if not len(data):
        return list(priors)
    d, T = _interval_stats(layout.edges, data.times, data.events)
    return [GammaParams(p.shape + int(dj), p.rate + float(tj)) for p, dj, tj in zip(priors, d, T)]


# three-piece recurrence model used by the futility example
RECURRENCE_CUTPOINTS = (8.0, 24.0)
RECURRENCE_BASE_RATES = (0.1, 0.05, 0.01)
RECURRENCE_HORIZON = 52.0


def recurrence_hazard(xi: float) -> PiecewiseHazard:
    """Three-piece hazard ``xi * (0.1, 0.05, 0.01)`` with cuts at 8 and 24 weeks."""
    return PiecewiseHazard(
        RECURRENCE_CUTPOINTS, tuple(xi * r for r in RECURRENCE_BASE_RATES), RECURRENCE_HORIZON
    )


def derive_xi(theta_target: float) -> float:
    """Scale ``xi`` for which the recurrence model has ``S(52) = theta_target``.

    The base cumulative hazard to 52 weeks is ``0.1*8 + 0.05*16 + 0.01*28 = 1.88``.
    """
    if not 0 < theta_target < 1:
        raise ValueError(f"theta_target must lie in (0, 1), got {theta_target}")
    base = cumulative_hazard(recurrence_hazard(1.0), RECURRENCE_HORIZON)
    return -math.log(theta_target) / base


def survival_prob(h: PiecewiseHazard, t):
    ta = np.asarray(t, dtype=float)
    if np.any((ta < 0) | (ta > h.horizon)):
        raise ValueError(f"t must lie in [0, {h.horizon}]")
    out = np.exp(-np.asarray(cumulative_hazard(h, ta)))
    return float(out) if out.ndim == 0 else out
