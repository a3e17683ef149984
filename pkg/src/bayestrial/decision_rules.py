"""Per-dataset decision rules and multiplicity procedures."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from scipy import special
from scipy.stats import norm

from .stats_dist import (
    BetaParams,
    GammaParams,
    PiecewiseHazard,
    RngLike,
    as_generator,
    beta_cdf_vec,
    invert_cumulative_hazard,
)
from .trial_model import BinaryDataset, Direction, Hypothesis, SurvivalDataset

__all__ = [
    "TestOutcome",
    "PosteriorProbRule",
    "GreenwoodRule",
    "PredictiveProbRule",
    "PValueVector",
    "posterior_prob_statistic",
    "posterior_prob_test",
    "predictive_prob",
    "z_test",
    "exact_binomial_pvalue",
    "kaplan_meier",
    "km_greenwood_batch",
    "greenwood_test",
    "bonferroni",
    "holm",
    "hochberg",
    "rejected_endpoints",
]


@dataclass(frozen=True)
class TestOutcome:
    statistic: float
    reject: bool
    pvalue: Optional[float] = None

    __test__ = False  # keep pytest from collecting this class


@dataclass(frozen=True)
class PosteriorProbRule:
    """Reject when the posterior probability of the alternative exceeds ``lam``."""

    hypothesis: Hypothesis
    lam: float = 0.975

    def __post_init__(self):
        if not 0 <= self.lam <= 1:
            raise ValueError(f"threshold must lie in [0, 1], got {self.lam}")


@dataclass(frozen=True)
class GreenwoodRule:
    """Kaplan-Meier confidence-bound test of ``S(t_eval) > bound``.

    ``transform`` selects the interval construction: ``"linear"`` is
    ``S - z*sqrt(Var)``; ``"loglog"`` builds the bound on ``log(-log S)`` and
    maps it back.
    """

    t_eval: float = 52.0
    bound: float = 0.5
    z: float = 1.96
    transform: str = "linear"

    def __post_init__(self):
        if self.transform not in ("linear", "loglog"):
            raise ValueError(f"unknown CI transform {self.transform!r}")


@dataclass(frozen=True)
class PredictiveProbRule:
    """Interim futility rule on the predictive probability of final success.

    ``layout`` supplies the interval structure when the interim posterior is a
    list of per-interval gamma posteriors (its rates are ignored).
    """

    gamma1: float
    final_rule: Union[PosteriorProbRule, GreenwoodRule]
    future_n: int
    draws: int = 500
    layout: Optional[PiecewiseHazard] = None

    def __post_init__(self):
        if not 0 <= self.gamma1 <= 1:
            raise ValueError("gamma1 must lie in [0, 1]")
        if self.future_n < 0:
            raise ValueError("future_n must be non-negative")


@dataclass(frozen=True)
class PValueVector:
    values: tuple

    def __post_init__(self):
        v = tuple(float(p) for p in self.values)
        if any(not 0 <= p <= 1 for p in v):
            raise ValueError("p-values must lie in [0, 1]")
        object.__setattr__(self, "values", v)


# ---------------------------------------------------------------------------
# posterior probability
# ---------------------------------------------------------------------------


def posterior_prob_statistic(hypothesis: Hypothesis, a, b):
    """``P[alternative | data]`` for beta posteriors with shapes ``a``, ``b``."""
    below = beta_cdf_vec(hypothesis.theta0, a, b)
    return below if hypothesis.direction is Direction.LESS else 1.0 - below


def posterior_prob_test(rule: PosteriorProbRule, post: BetaParams) -> TestOutcome:
    stat = float(posterior_prob_statistic(rule.hypothesis, post.alpha, post.beta))
    return TestOutcome(stat, stat > rule.lam)


# ---------------------------------------------------------------------------
# frequentist single-endpoint tests
# ---------------------------------------------------------------------------


def z_test(data: BinaryDataset, hypothesis: Hypothesis, alpha: float = 0.025) -> TestOutcome:
    """One-sample z-test for a proportion, no continuity correction."""
    if data.n <= 0:
        raise ValueError("z_test needs n > 0")
    th0 = hypothesis.theta0
    z = (data.x / data.n - th0) / math.sqrt(th0 * (1 - th0) / data.n)
    p = norm.sf(z) if hypothesis.direction is Direction.GREATER else norm.cdf(z)
    return TestOutcome(z, bool(p < alpha), float(p))


def z_test_reject_counts(x, n: int, hypothesis: Hypothesis, alpha: float) -> np.ndarray:
    """Vectorized z-test decisions over an array of counts."""
    th0 = hypothesis.theta0
    z = (np.asarray(x) / n - th0) / math.sqrt(th0 * (1 - th0) / n)
    p = norm.sf(z) if hypothesis.direction is Direction.GREATER else norm.cdf(z)
    return p < alpha


def exact_binomial_pvalue(data: BinaryDataset, hypothesis: Hypothesis):
    """One-sided exact binomial p-value in the alternative's direction.

    ``data.x`` may be an array of counts; the p-values come back elementwise.
    """
    return binomial_tail_pvalue(data.x, data.n, hypothesis)


def binomial_tail_pvalue(x, n, hypothesis: Hypothesis):
    n = np.asarray(n)
    if np.any(n <= 0):
        raise ValueError("exact binomial test needs n > 0")
    x = np.asarray(x, dtype=float)
    th0 = hypothesis.theta0
    if hypothesis.direction is Direction.GREATER:
        # P[X >= x] = I_th0(x, n - x + 1); x = 0 gives 1
        p = np.where(x <= 0, 1.0, special.betainc(np.maximum(x, 1), n - x + 1, th0))
    else:
        # P[X <= x] = I_{1-th0}(n - x, x + 1); x = n gives 1
        p = np.where(x >= n, 1.0, special.betainc(np.maximum(n - x, 1), x + 1, 1 - th0))
    return float(p) if p.ndim == 0 else p


# ---------------------------------------------------------------------------
# Kaplan-Meier / Greenwood
# ---------------------------------------------------------------------------


def km_greenwood_batch(times, events, t_eval: float) -> tuple[np.ndarray, np.ndarray]:
    """Kaplan-Meier ``S(t_eval)`` and the Greenwood sum, row by row.

    ``times`` and ``events`` have shape ``(..., n)``. Returns ``(S, G)`` with
    ``Var[S] = S**2 * G``; ``G`` is ``inf`` where ``S`` reaches zero.

    Events are processed one at a time with events ordered before censorings
    at tied times. Both the product ``prod(1 - d/n)`` and the sum
    ``sum d/(n(n-d))`` telescope exactly over a tied group, so this matches
    grouping by distinct event time.
    """
    times = np.asarray(times, dtype=float)
    events = np.asarray(events, dtype=bool)
    n = times.shape[-1]
    # lexsort: primary key time, ties broken with events (flag 0) first
    order = np.lexsort((~events, times), axis=-1)
    t_sorted = np.take_along_axis(times, order, axis=-1)
    e_sorted = np.take_along_axis(events, order, axis=-1)
    at_risk = n - np.arange(n, dtype=float)
    counted = e_sorted & (t_sorted <= t_eval)
    with np.errstate(divide="ignore"):
        gw_terms = np.where(counted, 1.0 / (at_risk * (at_risk - 1.0)), 0.0)
    surv = np.where(counted, 1.0 - 1.0 / at_risk, 1.0).prod(axis=-1)
    gw = gw_terms.sum(axis=-1)
    return surv, gw


def kaplan_meier(data: SurvivalDataset, t_eval: float) -> tuple[float, float]:
    """``(S_hat(t_eval), Greenwood variance)`` for one dataset."""
    if not len(data):
        raise ValueError("Kaplan-Meier needs at least one record")
    s, g = km_greenwood_batch(data.times, data.events, t_eval)
    var = 0.0 if s == 0 else float(s * s * g)
    return float(s), var


def greenwood_lower_bound(surv, gw, z: float = 1.96, transform: str = "linear"):
    """Lower confidence bound for ``S`` from the Kaplan-Meier pieces.

    Degenerate rows: ``S == 0`` gives 0; ``S == 1`` (no variance) gives 1.
    """
    surv = np.asarray(surv, dtype=float)
    gw = np.asarray(gw, dtype=float)
    pos = surv > 0
    full = surv >= 1
    with np.errstate(divide="ignore", invalid="ignore"):
        if transform == "linear":
            lb = surv - z * surv * np.sqrt(gw)
        elif transform == "loglog":
            log_s = np.log(surv)
            # se of log(-log S) by the delta method
            lb = surv ** np.exp(z * np.sqrt(gw) / np.abs(log_s))
        else:
            raise ValueError(f"unknown CI transform {transform!r}")
    lb = np.where(full, 1.0, np.where(pos, lb, 0.0))
    return float(lb) if lb.ndim == 0 else lb


def greenwood_test(
    data: SurvivalDataset,
    t_eval: float = 52.0,
    bound: float = 0.5,
    z: float = 1.96,
    transform: str = "linear",
) -> TestOutcome:
    """Reject when the lower confidence bound of ``S(t_eval)`` exceeds ``bound``."""
    if not len(data):
        raise ValueError("greenwood_test needs at least one record")
    s, g = km_greenwood_batch(data.times, data.events, t_eval)
    lb = greenwood_lower_bound(s, g, z, transform)
    return TestOutcome(float(lb), bool(lb > bound))


def _greenwood_reject_batch(rule: GreenwoodRule, times, events) -> np.ndarray:
    s, g = km_greenwood_batch(times, events, rule.t_eval)
    return greenwood_lower_bound(s, g, rule.z, rule.transform) > rule.bound


# ---------------------------------------------------------------------------
# predictive probability
# ---------------------------------------------------------------------------


def predictive_prob(
    rule: PredictiveProbRule,
    interim_post,
    rng: RngLike,
    interim_data: SurvivalDataset | None = None,
) -> float:
    """Monte Carlo predictive probability that the final analysis rejects.

    Each of ``rule.draws`` replicates draws parameters from the interim
    posterior, simulates the ``future_n`` remaining subjects and applies the
    final rule to the combined data.

    A beta interim posterior pairs with a :class:`PosteriorProbRule` final
    rule; the final posterior is the interim posterior updated with the
    simulated future counts. A list of per-interval gamma posteriors pairs
    with a :class:`GreenwoodRule` and needs ``interim_data`` and
    ``rule.layout``.
    """
    if rule.draws <= 0:
        raise ValueError("predictive_prob needs at least one draw")
    final = rule.final_rule

    if isinstance(interim_post, BetaParams):
        if not isinstance(final, PosteriorProbRule):
            raise TypeError("a beta interim posterior needs a PosteriorProbRule final rule")
        if rule.future_n == 0:
            stat = posterior_prob_statistic(final.hypothesis, interim_post.alpha, interim_post.beta)
            return float(stat > final.lam)
        g = as_generator(rng)
        theta = g.beta(interim_post.alpha, interim_post.beta, rule.draws)
        future_x = g.binomial(rule.future_n, theta)
        stat = posterior_prob_statistic(
            final.hypothesis,
            interim_post.alpha + future_x,
            interim_post.beta + rule.future_n - future_x,
        )
        return float(np.mean(stat > final.lam))

    posts = list(interim_post)
    if not all(isinstance(p, GammaParams) for p in posts):
        raise TypeError("interim posterior must be BetaParams or a list of GammaParams")
    if not isinstance(final, GreenwoodRule):
        raise TypeError("a piecewise gamma posterior needs a GreenwoodRule final rule")
    if interim_data is None or rule.layout is None:
        raise ValueError("survival prediction needs interim_data and rule.layout")
    if rule.future_n == 0:
        return float(_greenwood_reject_batch(final, interim_data.times, interim_data.events))

    g = as_generator(rng)
    shapes = np.array([p.shape for p in posts])
    rates = np.array([p.rate for p in posts])
    hazards = g.gamma(shapes, 1.0 / rates, size=(rule.draws, shapes.size))
    e = g.standard_exponential((rule.draws, rule.future_n))
    layout = rule.layout.with_rates(np.zeros(shapes.size))
    fut_t, fut_e = _future_times(layout, hazards, e)
    D = rule.draws
    times = np.concatenate([np.broadcast_to(interim_data.times, (D, len(interim_data))), fut_t], axis=1)
    events = np.concatenate([np.broadcast_to(interim_data.events, (D, len(interim_data))), fut_e], axis=1)
    return float(np.mean(_greenwood_reject_batch(final, times, events)))


def _future_times(layout: PiecewiseHazard, hazards: np.ndarray, e: np.ndarray):
    t = invert_cumulative_hazard(layout.edges, hazards[:, None, :], e)
    events = np.isfinite(t)
    return np.where(events, t, float(layout.horizon)), events


# ---------------------------------------------------------------------------
# multiplicity procedures
# ---------------------------------------------------------------------------


def _as_pvalues(p) -> np.ndarray:
    if isinstance(p, PValueVector):
        p = p.values
    p = np.asarray(p, dtype=float)
    if p.ndim == 0 or p.shape[-1] == 0:
        raise ValueError("need at least one p-value")
    return p


def bonferroni(p, alpha: float = 0.025) -> np.ndarray:
    """Boolean rejection mask: ``p_i < alpha / K``. Works row-wise on 2-D input."""
    p = _as_pvalues(p)
    return p < alpha / p.shape[-1]


def _ordered_thresholds(K: int, alpha: float) -> np.ndarray:
    # alpha/K, alpha/(K-1), ..., alpha
    return alpha / (K - np.arange(K))


def holm(p, alpha: float = 0.025) -> np.ndarray:
    """Step-down: walk the ordered p-values, stop at the first failure."""
    p = _as_pvalues(p)
    K = p.shape[-1]
    order = np.argsort(p, axis=-1, kind="stable")
    ps = np.take_along_axis(p, order, axis=-1)
    passed = np.cumprod(ps < _ordered_thresholds(K, alpha), axis=-1).astype(bool)
    out = np.zeros_like(passed)
    np.put_along_axis(out, order, passed, axis=-1)
    return out


def hochberg(p, alpha: float = 0.025) -> np.ndarray:
    """Step-up: the largest ordered p-value under its threshold rejects it and all smaller."""
    p = _as_pvalues(p)
    K = p.shape[-1]
    order = np.argsort(p, axis=-1, kind="stable")
    ps = np.take_along_axis(p, order, axis=-1)
    ok = ps < _ordered_thresholds(K, alpha)
    # reversed cumulative OR: position j passes if any position >= j passes
    passed = np.flip(np.logical_or.accumulate(np.flip(ok, axis=-1), axis=-1), axis=-1)
    out = np.zeros_like(passed)
    np.put_along_axis(out, order, passed, axis=-1)
    return out


def rejected_endpoints(mask) -> frozenset:
    """1-based endpoint indices flagged in a rejection mask."""
    return frozenset(int(i) + 1 for i in np.flatnonzero(np.asarray(mask)))
