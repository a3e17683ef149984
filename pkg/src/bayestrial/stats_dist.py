"""Distributions, densities and reproducible random streams.

Everything downstream draws randomness through :class:`RngStream`, a
counter-based (Philox) stream addressed by ``(master_seed, stream_index)``.
Two streams with different addresses occupy disjoint counter blocks, so a
replication's draws never depend on which worker ran it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence, Union

import numpy as np
from scipy import special

__all__ = [
    "BetaParams",
    "GammaParams",
    "PiecewiseHazard",
    "RngStream",
    "StreamCursor",
    "Bernoulli",
    "Binomial",
    "Beta",
    "Gamma",
    "Normal",
    "LogNormal",
    "InverseGamma",
    "beta_cdf",
    "binomial_pmf",
    "binomial_logpmf",
    "beta_binomial_pmf",
    "beta_binomial_logpmf",
    "student_t_logpdf",
    "sample",
    "sample_event_time",
    "sample_event_times",
    "cumulative_hazard",
    "invert_cumulative_hazard",
    "event_times_from_exponentials",
    "as_generator",
]


# ---------------------------------------------------------------------------
# parameter types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BetaParams:
    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError(f"Beta parameters must be positive, got ({self.alpha}, {self.beta})")

    @property
    def mean(self) -> float:
        return self.alpha / (self.alpha + self.beta)


@dataclass(frozen=True)
class GammaParams:
    """Gamma distribution in shape/rate form."""

    shape: float
    rate: float

    def __post_init__(self):
        if not (self.shape > 0 and self.rate > 0):
            raise ValueError(f"Gamma parameters must be positive, got ({self.shape}, {self.rate})")

    @property
    def mean(self) -> float:
        return self.shape / self.rate


@dataclass(frozen=True)
class PiecewiseHazard:
    """Piecewise-constant hazard on ``[0, horizon]``.

    ``cutpoints`` split the time axis into ``len(cutpoints) + 1`` intervals
    ``[0, c1], (c1, c2], ..., (ck, horizon]``; ``rates[j]`` is the hazard on
    interval ``j``.
    """

    cutpoints: tuple
    rates: tuple
    horizon: float

    def __post_init__(self):
        cuts = tuple(float(c) for c in self.cutpoints)
        rates = tuple(float(r) for r in self.rates)
        object.__setattr__(self, "cutpoints", cuts)
        object.__setattr__(self, "rates", rates)
        if len(rates) != len(cuts) + 1:
            raise ValueError("need exactly one rate per interval (len(cutpoints) + 1)")
        if any(r < 0 or not math.isfinite(r) for r in rates):
            raise ValueError("hazard rates must be finite and non-negative")
        if any(b <= a for a, b in zip(cuts, cuts[1:])):
            raise ValueError("cutpoints must be strictly ascending")
        if cuts and (cuts[0] <= 0 or cuts[-1] >= self.horizon):
            raise ValueError("cutpoints must lie strictly inside (0, horizon)")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")

    @property
    def edges(self) -> np.ndarray:
        """Interval boundaries ``[0, c1, ..., ck, horizon]``."""
        return np.array((0.0,) + self.cutpoints + (float(self.horizon),))

    @property
    def n_intervals(self) -> int:
        return len(self.rates)

    def with_rates(self, rates: Sequence[float]) -> "PiecewiseHazard":
        return PiecewiseHazard(self.cutpoints, tuple(rates), self.horizon)


# ---------------------------------------------------------------------------
# random streams
# ---------------------------------------------------------------------------

_U64 = (1 << 64) - 1


@lru_cache(maxsize=64)
def _philox_key(master_seed: int) -> tuple:
    key = np.random.SeedSequence(master_seed & _U64).generate_state(2, np.uint64)
    return int(key[0]), int(key[1])


@dataclass(frozen=True)
class RngStream:
    """Address of an independent random stream.

    The Philox key is derived from ``master_seed``; ``stream_index`` and
    ``substream`` occupy the two high words of the 256-bit counter. A stream
    consumes the low words, so distinct addresses never overlap.
    """

    master_seed: int
    stream_index: int = 0
    substream: int = 0

    def __post_init__(self):
        for name in ("master_seed", "stream_index", "substream"):
            v = getattr(self, name)
            if not (0 <= int(v) <= _U64):
                raise ValueError(f"{name} must be an unsigned 64-bit integer, got {v}")

    def generator(self) -> np.random.Generator:
        """Fresh generator positioned at the start of this stream."""
        bitgen = np.random.Philox(
            counter=[0, 0, self.stream_index, self.substream],
            key=np.array(_philox_key(self.master_seed), dtype=np.uint64),
        )
        return np.random.Generator(bitgen)

    def child(self, substream: int) -> "RngStream":
        return RngStream(self.master_seed, self.stream_index, substream)


class StreamCursor:
    """One generator that can be repositioned at the start of any stream.

    ``seek(i, j)`` yields exactly the sequence of
    ``RngStream(master_seed, i, j).generator()`` without constructing a new
    bit generator, which matters when replications are cheap.
    """

    def __init__(self, master_seed: int):
        self._key = np.array(_philox_key(master_seed), dtype=np.uint64)
        self._bitgen = np.random.Philox(key=self._key)
        self._gen = np.random.Generator(self._bitgen)

    def seek(self, stream_index: int, substream: int = 0) -> np.random.Generator:
        self._bitgen.state = {
            "bit_generator": "Philox",
            "state": {
                "counter": np.array([0, 0, stream_index, substream], dtype=np.uint64),
                "key": self._key,
            },
            "buffer": np.zeros(4, dtype=np.uint64),
            "buffer_pos": 4,
            "has_uint32": 0,
            "uinteger": 0,
        }
        return self._gen


RngLike = Union[RngStream, np.random.Generator]


def as_generator(rng: RngLike) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RngStream or numpy Generator, got {type(rng).__name__}")


# ---------------------------------------------------------------------------
# densities and cumulative functions
# ---------------------------------------------------------------------------


def beta_cdf(x, p: BetaParams):
    """Regularized incomplete beta function ``I_x(alpha, beta)``.

    Accepts scalar or array ``x``. Raises ``ValueError`` outside ``[0, 1]``.
    """
    xa = np.asarray(x, dtype=float)
    if np.any(~((xa >= 0) & (xa <= 1))):
        raise ValueError("beta_cdf: x must lie in [0, 1]")
    out = special.betainc(p.alpha, p.beta, xa)
    return float(out) if out.ndim == 0 else out


def beta_cdf_vec(x: float, a, b) -> np.ndarray:
    """``I_x(a, b)`` broadcast over arrays of shape parameters."""
    if not 0 <= x <= 1:
        raise ValueError("beta_cdf: x must lie in [0, 1]")
    return special.betainc(np.asarray(a, dtype=float), np.asarray(b, dtype=float), x)


def _check_counts(x, n):
    xa = np.asarray(x)
    if n < 0 or int(n) != n:
        raise ValueError(f"n must be a non-negative integer, got {n}")
    if np.any((xa < 0) | (xa > n)) or np.any(xa != np.floor(xa)):
        raise ValueError("x must be an integer in [0, n]")
    return xa


def binomial_logpmf(x, n: int, theta: float):
    xa = _check_counts(x, n).astype(float)
    if not 0 <= theta <= 1:
        raise ValueError(f"theta must lie in [0, 1], got {theta}")
    logc = special.gammaln(n + 1) - special.gammaln(xa + 1) - special.gammaln(n - xa + 1)
    # xlogy / xlog1py give 0 * log(0) = 0 at the boundaries
    out = logc + special.xlogy(xa, theta) + special.xlog1py(n - xa, -theta)
    return float(out) if np.ndim(out) == 0 else out


def binomial_pmf(x, n: int, theta: float):
    """Binomial probability mass, evaluated in log space."""
    out = np.exp(binomial_logpmf(x, n, theta))
    return float(out) if np.ndim(out) == 0 else out


def beta_binomial_logpmf(x, n: int, p: BetaParams):
    xa = _check_counts(x, n).astype(float)
    logc = special.gammaln(n + 1) - special.gammaln(xa + 1) - special.gammaln(n - xa + 1)
    out = logc + special.betaln(xa + p.alpha, n - xa + p.beta) - special.betaln(p.alpha, p.beta)
    return float(out) if np.ndim(out) == 0 else out


def beta_binomial_pmf(x, n: int, p: BetaParams):
    out = np.exp(beta_binomial_logpmf(x, n, p))
    return float(out) if np.ndim(out) == 0 else out


def student_t_logpdf(y, nu: float):
    """Log density of Student's t with ``nu`` degrees of freedom (unit scale)."""
    if not nu > 0:
        raise ValueError(f"degrees of freedom must be positive, got {nu}")
    y = np.asarray(y, dtype=float)
    out = (
        special.gammaln((nu + 1) / 2)
        - special.gammaln(nu / 2)
        - 0.5 * math.log(nu * math.pi)
        - (nu + 1) / 2 * np.log1p(y * y / nu)
    )
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# samplers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Bernoulli:
    theta: float

    def __post_init__(self):
        if not 0 <= self.theta <= 1:
            raise ValueError("Bernoulli theta must lie in [0, 1]")


@dataclass(frozen=True)
class Binomial:
    n: int
    theta: float

    def __post_init__(self):
        if self.n < 0 or not 0 <= self.theta <= 1:
            raise ValueError("Binomial requires n >= 0 and theta in [0, 1]")


@dataclass(frozen=True)
class Beta:
    params: BetaParams


@dataclass(frozen=True)
class Gamma:
    params: GammaParams


@dataclass(frozen=True)
class Normal:
    mean: float
    sd: float

    def __post_init__(self):
        if not self.sd > 0:
            raise ValueError("Normal sd must be positive")


@dataclass(frozen=True)
class LogNormal:
    """Log-normal with ``log X ~ N(mu, sigma^2)``."""

    mu: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("LogNormal sigma must be positive")


@dataclass(frozen=True)
class InverseGamma:
    """Inverse gamma with density proportional to ``x^(-shape-1) exp(-scale/x)``."""

    shape: float
    scale: float

    def __post_init__(self):
        if not (self.shape > 0 and self.scale > 0):
            raise ValueError("InverseGamma parameters must be positive")


def sample(dist, rng: RngLike, size=None):
    """Draw from one of the supported distributions.

    Passing an :class:`RngStream` restarts that stream, so two calls with the
    same stream return identical draws. Pass a ``Generator`` to keep consuming
    one sequence.
    """
    g = as_generator(rng)
    if isinstance(dist, Bernoulli):
        return (g.random(size) < dist.theta).astype(np.int64) if size is not None else int(g.random() < dist.theta)
    if isinstance(dist, Binomial):
        return g.binomial(dist.n, dist.theta, size)
    if isinstance(dist, Beta):
        return g.beta(dist.params.alpha, dist.params.beta, size)
    if isinstance(dist, Gamma):
        return g.gamma(dist.params.shape, 1.0 / dist.params.rate, size)
    if isinstance(dist, Normal):
        return g.normal(dist.mean, dist.sd, size)
    if isinstance(dist, LogNormal):
        return g.lognormal(dist.mu, dist.sigma, size)
    if isinstance(dist, InverseGamma):
        return dist.scale / g.gamma(dist.shape, 1.0, size)
    raise TypeError(f"unsupported distribution {type(dist).__name__}")


# ---------------------------------------------------------------------------
# piecewise-exponential event times
# ---------------------------------------------------------------------------


def cumulative_hazard(h: PiecewiseHazard, t):
    """Cumulative hazard ``Lambda(t)``; piecewise linear in ``t``."""
    edges = h.edges
    ta = np.asarray(t, dtype=float)
    widths = np.clip(ta[..., None] - edges[:-1], 0.0, np.diff(edges))
    out = widths @ np.asarray(h.rates)
    return float(out) if np.ndim(out) == 0 else out


def invert_cumulative_hazard(edges: np.ndarray, rates: np.ndarray, e: np.ndarray) -> np.ndarray:
    """Map unit-exponential draws ``e`` to event times under ``rates``.

    ``rates`` has shape ``(..., J)`` broadcastable against ``e[..., None]``.
    Draws whose time exceeds the horizon come back as ``inf``.
    """
    widths = np.diff(edges)
    seg = rates * widths  # hazard mass per interval
    cum = np.cumsum(seg, axis=-1)
    start = cum - seg
    e_ = e[..., None]
    # interval j holds the draw iff start_j < e <= cum_j
    inside = (e_ > start) & (e_ <= cum) & (rates > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        t_all = edges[:-1] + (e_ - start) / rates
    t = np.where(inside, t_all, np.inf).min(axis=-1)
    return t


def sample_event_times(h: PiecewiseHazard, rng: RngLike, size) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized event-time draws censored at the horizon.

    Returns ``(times, events)``; censored subjects have ``time == horizon`` and
    ``event == False``.
    """
    g = as_generator(rng)
    e = g.standard_exponential(size)
    return event_times_from_exponentials(h, e)


def event_times_from_exponentials(h: PiecewiseHazard, e) -> tuple[np.ndarray, np.ndarray]:
    e = np.asarray(e, dtype=float)
    t = invert_cumulative_hazard(h.edges, np.asarray(h.rates), e)
    events = np.isfinite(t)
    times = np.where(events, t, float(h.horizon))
    return times, events


def sample_event_time(h: PiecewiseHazard, rng: RngLike) -> tuple[float, bool]:
    """Single event time as ``(time, event)``; ``(horizon, False)`` if censored."""
    times, events = sample_event_times(h, rng, None)
    return float(times), bool(events)
