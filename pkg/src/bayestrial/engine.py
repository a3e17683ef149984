"""Nested Monte Carlo estimation of operating characteristics.

A design exposes ``simulate(scenario, master_seed, indices, settings)`` which
returns a :class:`ReplicationBatch` for the requested replication indices.
Replication ``r`` must draw all of its randomness from
``RngStream(master_seed, r)`` (and its children), so results do not depend on
how indices are chunked or which worker runs them.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Protocol, Sequence

import numpy as np
from scipy.stats import norm

from .trial_model import ScenarioSpec

__all__ = [
    "SimulationSettings",
    "ReplicationBatch",
    "OperatingCharacteristics",
    "PowerCurve",
    "SimulatedDesign",
    "wilson_ci",
    "estimate_oc",
    "power_curve",
    "run_replications",
    "map_replications",
    "summarize",
]

DEFAULT_SEED = 20240521


@dataclass(frozen=True)
class SimulationSettings:
    """Monte Carlo controls.

    ``inner_samples`` overrides the post-burn-in chain length of designs with
    an inner MCMC step; None keeps the design's own setting.
    """

    replications: int = 10_000
    inner_samples: Optional[int] = None
    master_seed: int = DEFAULT_SEED
    parallelism: int = 1

    def __post_init__(self):
        if int(self.replications) < 1:
            raise ValueError("replications must be at least 1")
        if self.inner_samples is not None and self.inner_samples < 0:
            raise ValueError("inner_samples must be non-negative")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must be an unsigned 64-bit integer")
        if self.parallelism < 1:
            raise ValueError("parallelism must be at least 1")


@dataclass
class ReplicationBatch:
    """Per-replication outcomes.

    ``stop_stage`` is the 1-based analysis at which the trial ended and
    ``n_used`` the number of subjects enrolled by then.
    """

    reject: np.ndarray
    stop_stage: np.ndarray
    n_used: np.ndarray
    extra: dict = field(default_factory=dict)

    @classmethod
    def concat(cls, parts: Sequence["ReplicationBatch"]) -> "ReplicationBatch":
        keys = parts[0].extra.keys() if parts else ()
        return cls(
            np.concatenate([p.reject for p in parts]),
            np.concatenate([p.stop_stage for p in parts]),
            np.concatenate([p.n_used for p in parts]),
            {k: np.concatenate([p.extra[k] for p in parts]) for k in keys},
        )


class SimulatedDesign(Protocol):
    n_stages: int
    total_n: int

    def simulate(
        self, scenario: ScenarioSpec, master_seed: int, indices: np.ndarray, settings: SimulationSettings
    ) -> ReplicationBatch: ...


@dataclass(frozen=True)
class OperatingCharacteristics:
    reject_rate: float
    ci_low: float
    ci_high: float
    pet: float
    expected_n: float
    per_stage_rejects: tuple
    replications: int
    rejections: int
    master_seed: int
    exact: Optional[float] = None

    @property
    def se(self) -> float:
        """Binomial standard error of ``reject_rate``."""
        p = self.reject_rate
        return math.sqrt(max(p * (1 - p), 0.0) / self.replications)

    def wilson_se(self) -> float:
        """Half-width of the Wilson interval divided by 1.96."""
        return (self.ci_high - self.ci_low) / (2 * 1.959963984540054)


@dataclass(frozen=True)
class PowerCurve:
    grid: tuple
    estimates: tuple

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.grid, self.grid[1:])):
            raise ValueError("power-curve grid must be strictly ascending")


def wilson_ci(successes: int, trials: int, level: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    if not 0 <= successes <= trials:
        raise ValueError("need 0 <= successes <= trials")
    z = norm.ppf(0.5 + level / 2)
    p = successes / trials
    z2n = z * z / trials
    centre = (p + z2n / 2) / (1 + z2n)
    half = z / (1 + z2n) * math.sqrt(p * (1 - p) / trials + z2n / (4 * trials))
    # at the boundaries the bound is exactly 0 or 1; rounding would leave ~1e-18
    lo = 0.0 if successes == 0 else max(0.0, centre - half)
    hi = 1.0 if successes == trials else min(1.0, centre + half)
    return float(lo), float(hi)


def _chunks(R: int, workers: int) -> list[np.ndarray]:
    n_chunks = max(1, min(R, workers * 4))
    return [c for c in np.array_split(np.arange(R, dtype=np.int64), n_chunks) if c.size]


def _call_chunk(job):
    fn, args, indices = job
    return fn(*args, indices)


def map_replications(fn, args: tuple, R: int, parallelism: int) -> list:
    """Evaluate ``fn(*args, indices)`` over chunks of ``0..R-1``.

    Chunk results come back in index order. ``fn`` and ``args`` must pickle
    when ``parallelism > 1``. The result never depends on the worker count.
    """
    if parallelism == 1:
        return [fn(*args, np.arange(R, dtype=np.int64))]
    jobs = [(fn, args, idx) for idx in _chunks(R, parallelism)]
    with ProcessPoolExecutor(max_workers=min(parallelism, len(jobs))) as pool:
        return list(pool.map(_call_chunk, jobs))


def _simulate(design, scenario, seed, settings, indices):
    return design.simulate(scenario, seed, indices, settings)


def run_replications(design, scenario: ScenarioSpec, settings: SimulationSettings) -> ReplicationBatch:
    """Simulate replications ``0..R-1`` and return them in index order."""
    parts = map_replications(
        _simulate, (design, scenario, settings.master_seed, settings), int(settings.replications), settings.parallelism
    )
    return parts[0] if len(parts) == 1 else ReplicationBatch.concat(parts)


def summarize(batch: ReplicationBatch, n_stages: int, settings: SimulationSettings,
              exact: Optional[float] = None) -> OperatingCharacteristics:
    R = int(batch.reject.size)
    rejections = int(np.count_nonzero(batch.reject))
    stages = np.asarray(batch.stop_stage, dtype=np.int64)
    per_stage = tuple(int(np.count_nonzero(batch.reject & (stages == k))) for k in range(1, n_stages + 1))
    early = int(np.count_nonzero(stages < n_stages))
    total_n = int(np.sum(batch.n_used, dtype=np.int64))
    lo, hi = wilson_ci(rejections, R)
    return OperatingCharacteristics(
        reject_rate=rejections / R,
        ci_low=lo,
        ci_high=hi,
        pet=early / R,
        expected_n=total_n / R,
        per_stage_rejects=per_stage,
        replications=R,
        rejections=rejections,
        master_seed=settings.master_seed,
        exact=exact,
    )


def estimate_oc(design, scenario: ScenarioSpec, settings: SimulationSettings,
                with_exact: bool = False) -> OperatingCharacteristics:
    """Monte Carlo operating characteristics of ``design`` under ``scenario``.

    With ``with_exact`` the design's enumeration oracle (if it has one) fills
    the ``exact`` field.
    """
    check = getattr(design, "check_settings", None)
    if check is not None:
        check(settings)
    batch = run_replications(design, scenario, settings)
    exact = None
    if with_exact and hasattr(design, "exact_reject_prob"):
        exact = design.exact_reject_prob(scenario)
    return summarize(batch, design.n_stages, settings, exact)


def power_curve(design, grid: Sequence[float], settings: SimulationSettings,
                with_exact: bool = False) -> PowerCurve:
    """Operating characteristics along a grid of true parameter values.

    Every grid point reuses replication streams ``0..R-1``, so neighbouring
    points share random numbers and the curve is smooth in the parameter.
    """
    grid = tuple(float(g) for g in grid)
    if not grid:
        raise ValueError("power_curve needs a nonempty grid")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("power-curve grid must be strictly ascending")
    estimates = tuple(estimate_oc(design, ScenarioSpec((g,)), settings, with_exact) for g in grid)
    return PowerCurve(grid, estimates)


def with_replications(settings: SimulationSettings, R: int) -> SimulationSettings:
    return replace(settings, replications=R)
