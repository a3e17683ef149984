"""Concrete trial designs, their exact oracles and sample-size search."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import ClassVar, Optional, Sequence, Union

import numpy as np

from . import decision_rules as dr
from .engine import (
    OperatingCharacteristics,
    ReplicationBatch,
    SimulationSettings,
    estimate_oc,
    map_replications,
    summarize,
)
from .mcmc import BhmConfig, EssConfig, bhm_posterior, ess_t_posterior
from .stats_dist import (
    BetaParams,
    GammaParams,
    PiecewiseHazard,
    RngStream,
    StreamCursor,
    beta_binomial_pmf,
    binomial_pmf,
    cumulative_hazard,
    event_times_from_exponentials,
)
from .trial_model import (
    DEFAULT_INITIAL_PRIOR,
    BinaryDataset,
    Direction,
    ErrorRequirements,
    Hypothesis,
    PilotData,
    ScenarioLabel,
    ScenarioSpec,
    SurvivalDataset,
    beta_posterior,
    piecewise_posterior,
    power_prior_posterior,
)

__all__ = [
    "Variant",
    "SingleBinaryDesign",
    "BorrowingBinaryDesign",
    "GsdBinaryDesign",
    "FutilitySurvivalDesign",
    "MultiplicityDesign",
    "TdfDesign",
    "GsdExact",
    "FutilityOutcome",
    "MultiplicityResult",
    "SampleSizeSearchSpec",
    "SearchRow",
    "SampleSizeResult",
    "NOT_FOUND",
    "run_single_binary",
    "exact_oc_binary",
    "run_gsd",
    "exact_oc_gsd",
    "run_futility_survival",
    "run_multiplicity",
    "run_borrowing",
    "run_tdf_design",
    "prior_claim_probability",
    "prior_claim_probability_mc",
    "search_sample_size",
]


class Variant(str, enum.Enum):
    SINGLE_BINARY = "SINGLE_BINARY"
    GSD_BINARY = "GSD_BINARY"
    FUTILITY_SURVIVAL = "FUTILITY_SURVIVAL"
    MULTIPLICITY = "MULTIPLICITY"
    BORROWING_BINARY = "BORROWING_BINARY"
    TDF_TEST = "TDF_TEST"


ADVERSE_EVENT_GOAL = Hypothesis(0.12, Direction.LESS)


def _check_lam(lam: float, name: str = "lam"):
    if not 0 <= lam <= 1:
        raise ValueError(f"{name} must lie in [0, 1], got {lam}")


def _check_n(n: int, name: str = "n"):
    if int(n) != n or n < 1:
        raise ValueError(f"{name} must be a positive integer, got {n}")


# ---------------------------------------------------------------------------
# shared binary machinery
# ---------------------------------------------------------------------------


@lru_cache(maxsize=32)
def _binomial_draws(master_seed: int, sizes: tuple, theta: float, indices_key: bytes) -> np.ndarray:
    """Counts for each replication: row ``r`` is drawn from stream ``r``.

    Designs that only need binomial counts share this cache, so every design
    evaluated at the same seed and truth sees the same simulated trials.
    """
    indices = np.frombuffer(indices_key, dtype=np.int64)
    cursor = StreamCursor(master_seed)
    n_arr = np.asarray(sizes, dtype=np.int64)
    out = np.empty((indices.size, len(sizes)), dtype=np.int64)
    for row, r in enumerate(indices):
        out[row] = cursor.seek(int(r)).binomial(n_arr, theta)
    out.setflags(write=False)
    return out


def binomial_draws(master_seed: int, sizes: Sequence[int], theta: float, indices: np.ndarray) -> np.ndarray:
    idx = np.ascontiguousarray(indices, dtype=np.int64)
    return _binomial_draws(int(master_seed), tuple(int(s) for s in sizes), float(theta), idx.tobytes())


def _scenario_theta(scenario: Union[ScenarioSpec, float]) -> float:
    if isinstance(scenario, ScenarioSpec):
        return scenario.theta
    return float(scenario)


class _SingleStageBinary:
    """Behaviour shared by designs whose decision depends only on ``x`` of ``n``."""

    n_stages: ClassVar[int] = 1

    @property
    def total_n(self) -> int:
        return self.n

    @property
    def first_stage_n(self) -> int:
        return self.n

    def reject_counts(self, x) -> np.ndarray:
        raise NotImplementedError

    def rejection_region(self) -> np.ndarray:
        """Boolean mask over ``x = 0..n``."""
        return np.asarray(self.reject_counts(np.arange(self.n + 1)), dtype=bool)

    def with_n(self, n: int):
        return replace(self, n=n)

    def exact_reject_prob(self, scenario) -> float:
        return exact_oc_binary(self, _scenario_theta(scenario))

    def simulate(self, scenario, master_seed, indices, settings) -> ReplicationBatch:
        theta = _scenario_theta(scenario)
        x = binomial_draws(master_seed, (self.n,), theta, indices)[:, 0]
        reject = self.rejection_region()[x]
        ones = np.ones(x.size, dtype=np.int64)
        return ReplicationBatch(reject, ones, ones * self.n, {"x": x})


@dataclass(frozen=True)
class SingleBinaryDesign(_SingleStageBinary):
    """Single-stage binary design.

    ``test="posterior"`` rejects when the beta posterior puts more than ``lam``
    on the alternative; ``test="ztest"`` is the frequentist reference with
    level ``alpha``.
    """

    n: int
    hypothesis: Hypothesis = ADVERSE_EVENT_GOAL
    prior: BetaParams = BetaParams(1.0, 1.0)
    lam: float = 0.975
    test: str = "posterior"
    alpha: float = 0.025
    variant: ClassVar[Variant] = Variant.SINGLE_BINARY

    def __post_init__(self):
        _check_n(self.n)
        _check_lam(self.lam)
        if self.test not in ("posterior", "ztest"):
            raise ValueError(f"test must be 'posterior' or 'ztest', got {self.test!r}")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")

    def reject_counts(self, x) -> np.ndarray:
        x = np.asarray(x)
        if self.test == "ztest":
            return dr.z_test_reject_counts(x, self.n, self.hypothesis, self.alpha)
        stat = dr.posterior_prob_statistic(self.hypothesis, self.prior.alpha + x, self.prior.beta + self.n - x)
        return stat > self.lam


@dataclass(frozen=True)
class BorrowingBinaryDesign(_SingleStageBinary):
    """Single-stage binary design whose prior is a power prior on pilot data."""

    n: int
    pilot: PilotData
    a0: float
    hypothesis: Hypothesis = ADVERSE_EVENT_GOAL
    initial: BetaParams = DEFAULT_INITIAL_PRIOR
    lam: float = 0.975
    variant: ClassVar[Variant] = Variant.BORROWING_BINARY

    def __post_init__(self):
        _check_n(self.n)
        _check_lam(self.lam)
        if not 0 <= self.a0 <= 1:
            raise ValueError(f"a0 must lie in [0, 1], got {self.a0}")

    def posterior(self, data: BinaryDataset) -> BetaParams:
        return power_prior_posterior(self.initial, self.pilot, self.a0, data)

    def reject_counts(self, x) -> np.ndarray:
        x = np.asarray(x)
        a = x + self.a0 * self.pilot.x0 + self.initial.alpha
        b = self.n - x + self.a0 * (self.pilot.n0 - self.pilot.x0) + self.initial.beta
        return dr.posterior_prob_statistic(self.hypothesis, a, b) > self.lam


def run_single_binary(spec: Union[SingleBinaryDesign, BorrowingBinaryDesign], data: BinaryDataset) -> dr.TestOutcome:
    if data.n != spec.n:
        raise ValueError(f"design expects n={spec.n}, data has n={data.n}")
    if isinstance(spec, BorrowingBinaryDesign):
        return dr.posterior_prob_test(dr.PosteriorProbRule(spec.hypothesis, spec.lam), spec.posterior(data))
    if spec.test == "ztest":
        return dr.z_test(data, spec.hypothesis, spec.alpha)
    return dr.posterior_prob_test(dr.PosteriorProbRule(spec.hypothesis, spec.lam), beta_posterior(spec.prior, data))


def exact_oc_binary(spec, theta_true: float) -> float:
    """Rejection probability by summing binomial weights over the rejection region."""
    if not isinstance(spec, (SingleBinaryDesign, BorrowingBinaryDesign)):
        raise TypeError(f"exact_oc_binary needs a single-stage binary design, got {type(spec).__name__}")
    region = spec.rejection_region()
    if not region.any():
        return 0.0
    x = np.arange(spec.n + 1)
    return float(math.fsum(binomial_pmf(x[region], spec.n, theta_true)))


def run_borrowing(spec: BorrowingBinaryDesign, scenario: ScenarioSpec, settings: SimulationSettings,
                  with_exact: bool = True) -> OperatingCharacteristics:
    return estimate_oc(spec, scenario, settings, with_exact=with_exact)


# ---------------------------------------------------------------------------
# group sequential
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GsdExact:
    reject_prob: float
    pet: float
    expected_n: float
    per_stage: tuple


@dataclass(frozen=True)
class GsdBinaryDesign:
    """K-stage binary design that stops for efficacy at the first analysis
    whose posterior probability exceeds that stage's threshold."""

    stage_sizes: tuple
    lams: tuple
    hypothesis: Hypothesis = ADVERSE_EVENT_GOAL
    prior: BetaParams = BetaParams(1.0, 1.0)
    variant: ClassVar[Variant] = Variant.GSD_BINARY

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.stage_sizes)
        lams = tuple(float(v) for v in self.lams)
        if not sizes or len(sizes) != len(lams):
            raise ValueError("stage_sizes and lams must be nonempty and of equal length")
        for s in sizes:
            _check_n(s, "stage size")
        for v in lams:
            _check_lam(v, "stage threshold")
        object.__setattr__(self, "stage_sizes", sizes)
        object.__setattr__(self, "lams", lams)

    @property
    def n_stages(self) -> int:
        return len(self.stage_sizes)

    @property
    def total_n(self) -> int:
        return sum(self.stage_sizes)

    @property
    def first_stage_n(self) -> int:
        return self.stage_sizes[0]

    @property
    def cumulative_sizes(self) -> np.ndarray:
        return np.cumsum(self.stage_sizes)

    def stage_rejects(self, k: int, cum_x) -> np.ndarray:
        """Decision at analysis ``k`` (0-based) from cumulative counts."""
        n_k = self.cumulative_sizes[k]
        cum_x = np.asarray(cum_x)
        stat = dr.posterior_prob_statistic(self.hypothesis, self.prior.alpha + cum_x, self.prior.beta + n_k - cum_x)
        return stat > self.lams[k]

    def exact_reject_prob(self, scenario) -> float:
        return exact_oc_gsd(self, _scenario_theta(scenario)).reject_prob

    def simulate(self, scenario, master_seed, indices, settings) -> ReplicationBatch:
        theta = _scenario_theta(scenario)
        x = binomial_draws(master_seed, self.stage_sizes, theta, indices)
        cum = np.cumsum(x, axis=1)
        R = x.shape[0]
        stop = np.full(R, self.n_stages, dtype=np.int64)
        reject = np.zeros(R, dtype=bool)
        active = np.ones(R, dtype=bool)
        for k in range(self.n_stages):
            hit = active & self.stage_rejects(k, cum[:, k])
            reject |= hit
            stop[hit] = k + 1
            active &= ~hit
        n_used = self.cumulative_sizes[stop - 1]
        return ReplicationBatch(reject, stop, n_used.astype(np.int64))


def run_gsd(spec: GsdBinaryDesign, stage_data: Sequence[BinaryDataset]) -> tuple[int, dr.TestOutcome]:
    """Apply the staged rule to per-stage data increments.

    Returns the 1-based stage at which the trial ended and the outcome of
    that analysis. Stages after a rejection are ignored.
    """
    if len(stage_data) != spec.n_stages:
        raise ValueError(f"expected {spec.n_stages} stage datasets, got {len(stage_data)}")
    total = BinaryDataset(0, 0)
    outcome = None
    for k, (d, size) in enumerate(zip(stage_data, spec.stage_sizes)):
        if d.n != size:
            raise ValueError(f"stage {k + 1} expects {size} subjects, got {d.n}")
        total = total + d
        post = beta_posterior(spec.prior, total)
        outcome = dr.posterior_prob_test(dr.PosteriorProbRule(spec.hypothesis, spec.lams[k]), post)
        if outcome.reject:
            return k + 1, outcome
    return spec.n_stages, outcome


def exact_oc_gsd(spec: GsdBinaryDesign, theta_true: float) -> GsdExact:
    """Exact staged operating characteristics by convolving count distributions.

    The mass of trials still running is tracked as a distribution over the
    cumulative count; at each analysis the rejecting part is removed.
    """
    if not isinstance(spec, GsdBinaryDesign):
        raise TypeError(f"exact_oc_gsd needs a GsdBinaryDesign, got {type(spec).__name__}")
    running = np.array([1.0])
    per_stage = []
    cum_sizes = spec.cumulative_sizes
    for k, size in enumerate(spec.stage_sizes):
        step = binomial_pmf(np.arange(size + 1), size, theta_true)
        running = np.convolve(running, step)
        hit = spec.stage_rejects(k, np.arange(cum_sizes[k] + 1))
        per_stage.append(float(math.fsum(running[hit])))
        running = np.where(hit, 0.0, running)
    # early termination: rejection at any analysis before the last
    pet = float(math.fsum(per_stage[:-1]))
    stop_probs = per_stage[:-1] + [1.0 - pet]
    expected_n = float(sum(p * n for p, n in zip(stop_probs, cum_sizes)))
    return GsdExact(float(math.fsum(per_stage)), pet, expected_n, tuple(per_stage))


# ---------------------------------------------------------------------------
# two-stage survival futility design
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FutilityOutcome:
    stopped_for_futility: bool
    predictive: Optional[float]
    final: Optional[dr.TestOutcome]

    @property
    def reject(self) -> bool:
        return self.final is not None and self.final.reject


@dataclass(frozen=True)
class FutilitySurvivalDesign:
    """Two-stage single-arm survival design with a predictive-probability
    futility look once the first ``n1`` subjects complete follow-up.

    The scenario's true parameter is ``S(t_eval)``; the data-generating hazard
    is ``xi * base_rates`` with ``xi`` chosen to hit it. ``ci_transform``
    selects the scale of the Greenwood confidence bound (see
    :func:`bayestrial.decision_rules.greenwood_lower_bound`).
    """

    n: int = 100
    n1: int = 30
    gamma1: float = 0.05
    prior: GammaParams = GammaParams(0.1, 0.1)
    cutpoints: tuple = (8.0, 24.0)
    base_rates: tuple = (0.1, 0.05, 0.01)
    horizon: float = 52.0
    t_eval: float = 52.0
    bound: float = 0.5
    z: float = 1.96
    ci_transform: str = "loglog"
    draws: int = 500
    variant: ClassVar[Variant] = Variant.FUTILITY_SURVIVAL
    n_stages: ClassVar[int] = 2

    def __post_init__(self):
        _check_n(self.n)
        if not 0 < self.n1 <= self.n:
            raise ValueError("need 0 < n1 <= n")
        _check_lam(self.gamma1, "gamma1")
        if self.draws < 1:
            raise ValueError("draws must be positive")
        object.__setattr__(self, "cutpoints", tuple(float(c) for c in self.cutpoints))
        object.__setattr__(self, "base_rates", tuple(float(r) for r in self.base_rates))
        # validates the layout
        self.layout(1.0)
        if self.ci_transform not in ("linear", "loglog"):
            raise ValueError("ci_transform must be 'linear' or 'loglog'")

    @property
    def total_n(self) -> int:
        return self.n

    @property
    def first_stage_n(self) -> int:
        return self.n1

    def layout(self, xi: float) -> PiecewiseHazard:
        return PiecewiseHazard(self.cutpoints, tuple(xi * r for r in self.base_rates), self.horizon)

    def hazard_for(self, theta: float) -> PiecewiseHazard:
        """Hazard whose survival at ``t_eval`` equals ``theta``."""
        if not 0 < theta < 1:
            raise ValueError(f"survival target must lie in (0, 1), got {theta}")
        base = cumulative_hazard(self.layout(1.0), self.t_eval)
        return self.layout(-math.log(theta) / base)

    @property
    def final_rule(self) -> dr.GreenwoodRule:
        return dr.GreenwoodRule(self.t_eval, self.bound, self.z, self.ci_transform)

    @property
    def futility_rule(self) -> dr.PredictiveProbRule:
        return dr.PredictiveProbRule(self.gamma1, self.final_rule, self.n - self.n1, self.draws, self.layout(0.0))

    def single_stage(self) -> "FutilitySurvivalDesign":
        """The same design without the interim look."""
        return replace(self, gamma1=0.0)

    @property
    def has_interim(self) -> bool:
        return self.gamma1 > 0 and self.n1 < self.n

    def _interim(self, times, events, pred_rng) -> tuple[bool, float]:
        interim = SurvivalDataset(times[: self.n1], events[: self.n1])
        post = piecewise_posterior(self.prior, interim, self.layout(0.0))
        pp = dr.predictive_prob(self.futility_rule, post, pred_rng, interim)
        return pp < self.gamma1, pp

    def simulate(self, scenario, master_seed, indices, settings) -> ReplicationBatch:
        h = self.hazard_for(_scenario_theta(scenario))
        cursor = StreamCursor(master_seed)
        R = len(indices)
        e = np.empty((R, self.n))
        for row, r in enumerate(indices):
            e[row] = cursor.seek(int(r)).standard_exponential(self.n)
        times, events = event_times_from_exponentials(h, e)
        stopped = np.zeros(R, dtype=bool)
        pp = np.full(R, np.nan)
        if self.has_interim:
            for row, r in enumerate(indices):
                stopped[row], pp[row] = self._interim(times[row], events[row], cursor.seek(int(r), 1))
        final = dr._greenwood_reject_batch(self.final_rule, times, events)
        reject = final & ~stopped
        stop = np.where(stopped, 1, 2).astype(np.int64)
        n_used = np.where(stopped, self.n1, self.n).astype(np.int64)
        return ReplicationBatch(reject, stop, n_used, {"predictive": pp, "final_reject": final})


def run_futility_survival(spec: FutilitySurvivalDesign, scenario, rng: RngStream) -> FutilityOutcome:
    """One simulated trial.

    All ``n`` subjects' outcomes come from ``rng``; the predictive draws use
    ``rng.child(1)``. This is the stream layout :meth:`simulate` uses, so a
    replication here matches replication ``rng.stream_index`` there.
    """
    h = spec.hazard_for(_scenario_theta(scenario))
    e = rng.generator().standard_exponential(spec.n)
    times, events = event_times_from_exponentials(h, e)
    pp = None
    if spec.has_interim:
        stop, pp = spec._interim(times, events, rng.child(1))
        if stop:
            return FutilityOutcome(True, pp, None)
    final = dr.greenwood_test(
        SurvivalDataset(times, events), spec.t_eval, spec.bound, spec.z, spec.ci_transform
    )
    return FutilityOutcome(False, pp, final)


# ---------------------------------------------------------------------------
# multiple endpoints
# ---------------------------------------------------------------------------

METHODS = ("BHM", "BONFERRONI", "HOLM", "HOCHBERG")


@dataclass(frozen=True)
class MultiplicityResult:
    """Family-level rates for one method.

    ``disjunctive``/``conjunctive`` are None when no endpoint is truly
    non-null, and ``fwer`` is None when no endpoint is truly null.
    """

    method: str
    fwer: Optional[float]
    disjunctive: Optional[float]
    conjunctive: Optional[float]
    per_endpoint: tuple
    replications: int
    counts: dict = field(default_factory=dict)


@dataclass(frozen=True)
class MultiplicityDesign:
    """K single-arm binary endpoints tested against a common goal."""

    k: int = 5
    n_per: tuple = (100,)
    theta0: float = 0.35
    lam: float = 0.985
    alpha: float = 0.025
    bhm: BhmConfig = BhmConfig()
    methods: tuple = METHODS
    variant: ClassVar[Variant] = Variant.MULTIPLICITY

    def __post_init__(self):
        _check_n(self.k, "k")
        n_per = tuple(int(v) for v in np.broadcast_to(np.asarray(self.n_per), (self.k,)))
        for v in n_per:
            _check_n(v, "n_per")
        object.__setattr__(self, "n_per", n_per)
        _check_lam(self.lam)
        methods = tuple(str(m).upper() for m in self.methods)
        bad = set(methods) - set(METHODS)
        if bad:
            raise ValueError(f"unknown multiplicity methods {sorted(bad)}")
        object.__setattr__(self, "methods", methods)
        if not 0 < self.theta0 < 1:
            raise ValueError("theta0 must lie in (0, 1)")

    @property
    def hypothesis(self) -> Hypothesis:
        return Hypothesis(self.theta0, Direction.GREATER)

    def check_settings(self, settings: SimulationSettings):
        if "BHM" in self.methods and settings.inner_samples == 0:
            raise ValueError("the hierarchical model needs inner_samples > 0")

    def bhm_config(self, settings: SimulationSettings) -> BhmConfig:
        if settings.inner_samples:
            return replace(self.bhm, n_samples=settings.inner_samples)
        return self.bhm

    def true_params(self, scenario: ScenarioSpec) -> np.ndarray:
        p = np.asarray(scenario.true_params, dtype=float)
        if p.size == 1:
            p = np.repeat(p, self.k)
        if p.size != self.k:
            raise ValueError(f"scenario has {p.size} parameters for {self.k} endpoints")
        return p

    def decisions(self, y: np.ndarray, bhm_rng: Optional[Sequence[RngStream]] = None,
                  cfg: Optional[BhmConfig] = None) -> dict:
        """Rejection masks ``(R, K)`` per method for count rows ``y``."""
        y = np.atleast_2d(y)
        hyp = self.hypothesis
        n = np.asarray(self.n_per)
        out = {}
        if {"BONFERRONI", "HOLM", "HOCHBERG"} & set(self.methods):
            p = dr.binomial_tail_pvalue(y, n, hyp)
            p = np.atleast_2d(p)
            procs = {"BONFERRONI": dr.bonferroni, "HOLM": dr.holm, "HOCHBERG": dr.hochberg}
            for m in self.methods:
                if m in procs:
                    out[m] = procs[m](p, self.alpha)
        if "BHM" in self.methods:
            if bhm_rng is None:
                raise ValueError("BHM decisions need one random stream per row")
            cfg = cfg or self.bhm
            mask = np.zeros(y.shape, dtype=bool)
            for row, rng in enumerate(bhm_rng):
                chain = bhm_posterior(y[row], n, cfg, rng)
                stat = (chain.draws[:, : self.k] > self.theta0).mean(axis=0)
                mask[row] = stat > self.lam
            out["BHM"] = mask
        return out


def _multiplicity_chunk(spec: MultiplicityDesign, theta: np.ndarray, seed: int, cfg: BhmConfig, indices) -> dict:
    cursor = StreamCursor(seed)
    n = np.asarray(spec.n_per)
    y = np.empty((len(indices), spec.k), dtype=np.int64)
    for row, r in enumerate(indices):
        y[row] = cursor.seek(int(r)).binomial(n, theta)
    streams = [RngStream(seed, int(r), 1) for r in indices]
    masks = spec.decisions(y, streams, cfg)
    masks["y"] = y
    return masks


def multiplicity_masks(spec: MultiplicityDesign, scenario: ScenarioSpec, settings: SimulationSettings) -> dict:
    """Per-replication rejection masks, keyed by method, plus the counts ``y``."""
    spec.check_settings(settings)
    theta = spec.true_params(scenario)
    parts = map_replications(
        _multiplicity_chunk,
        (spec, theta, settings.master_seed, spec.bhm_config(settings)),
        int(settings.replications),
        settings.parallelism,
    )
    return {key: np.concatenate([p[key] for p in parts]) for key in parts[0]}


def summarize_family(method: str, mask: np.ndarray, null: np.ndarray) -> MultiplicityResult:
    R = mask.shape[0]
    counts = {}
    fwer = disj = conj = None
    if null.any():
        counts["any_false_rejection"] = int(np.count_nonzero(mask[:, null].any(axis=1)))
        fwer = counts["any_false_rejection"] / R
    alt = ~null
    if alt.any():
        counts["any_true_rejection"] = int(np.count_nonzero(mask[:, alt].any(axis=1)))
        counts["all_true_rejections"] = int(np.count_nonzero(mask[:, alt].all(axis=1)))
        disj = counts["any_true_rejection"] / R
        conj = counts["all_true_rejections"] / R
    per = tuple(int(c) / R for c in mask.sum(axis=0))
    return MultiplicityResult(method, fwer, disj, conj, per, R, counts)


def run_multiplicity(spec: MultiplicityDesign, scenario: ScenarioSpec,
                     settings: SimulationSettings) -> dict[str, MultiplicityResult]:
    """Familywise error and disjunctive/conjunctive power for each method."""
    masks = multiplicity_masks(spec, scenario, settings)
    null = np.array([spec.hypothesis.is_null(t) for t in spec.true_params(scenario)])
    return {m: summarize_family(m, masks[m], null) for m in spec.methods}


# ---------------------------------------------------------------------------
# Student-t degrees of freedom
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TdfDesign:
    """Test ``theta >= theta0`` against ``theta < theta0`` for the degrees of
    freedom of a t-distributed sample, via an elliptical slice posterior."""

    n: int = 100
    theta0: float = 5.0
    lam: float = 0.985
    ess: EssConfig = EssConfig()
    variant: ClassVar[Variant] = Variant.TDF_TEST
    n_stages: ClassVar[int] = 1

    def __post_init__(self):
        _check_n(self.n)
        _check_lam(self.lam)
        if not self.theta0 > 0:
            raise ValueError("theta0 must be positive")

    @property
    def total_n(self) -> int:
        return self.n

    @property
    def first_stage_n(self) -> int:
        return self.n

    def with_n(self, n: int) -> "TdfDesign":
        return replace(self, n=n)

    def check_settings(self, settings: SimulationSettings):
        if settings.inner_samples == 0:
            raise ValueError("the t design needs inner_samples > 0")

    def ess_config(self, settings: SimulationSettings) -> EssConfig:
        if settings.inner_samples:
            return replace(self.ess, n_samples=settings.inner_samples)
        return self.ess

    def statistic(self, data, rng, cfg: Optional[EssConfig] = None) -> float:
        """Posterior probability of the alternative, ``P[theta < theta0 | data]``."""
        chain = ess_t_posterior(data, cfg or self.ess, rng)
        return float(np.mean(chain["theta"] < self.theta0))

    def simulate(self, scenario, master_seed, indices, settings) -> ReplicationBatch:
        theta = _scenario_theta(scenario)
        if not theta > 0:
            raise ValueError("degrees of freedom must be positive")
        cfg = self.ess_config(settings)
        cursor = StreamCursor(master_seed)
        stat = np.empty(len(indices))
        for row, r in enumerate(indices):
            data = cursor.seek(int(r)).standard_t(theta, self.n)
            stat[row] = self.statistic(data, RngStream(master_seed, int(r), 1), cfg)
        ones = np.ones(len(indices), dtype=np.int64)
        return ReplicationBatch(stat > self.lam, ones, ones * self.n, {"statistic": stat})


def run_tdf_design(spec: TdfDesign, scenario: ScenarioSpec, settings: SimulationSettings) -> OperatingCharacteristics:
    return estimate_oc(spec, scenario, settings)


# ---------------------------------------------------------------------------
# prior probability of the study claim
# ---------------------------------------------------------------------------


def _claim_region(prior: BetaParams, n: int, rule: dr.PosteriorProbRule) -> np.ndarray:
    x = np.arange(n + 1)
    stat = dr.posterior_prob_statistic(rule.hypothesis, prior.alpha + x, prior.beta + n - x)
    return stat > rule.lam


def prior_claim_probability(prior: BetaParams, n: int, rule: dr.PosteriorProbRule) -> float:
    """Probability that a trial of size ``n`` succeeds before any data are seen.

    The prior serves as both sampling and fitting prior, so the count is
    beta-binomial and the sum over the rejection region is exact.
    """
    _check_n(n)
    region = _claim_region(prior, n, rule)
    if not region.any():
        return 0.0
    return float(math.fsum(beta_binomial_pmf(np.arange(n + 1)[region], n, prior)))


def _claim_chunk(prior: BetaParams, n: int, seed: int, indices):
    cursor = StreamCursor(seed)
    x = np.empty(len(indices), dtype=np.int64)
    for row, r in enumerate(indices):
        g = cursor.seek(int(r))
        x[row] = g.binomial(n, g.beta(prior.alpha, prior.beta))
    return x


def prior_claim_probability_mc(prior: BetaParams, n: int, rule: dr.PosteriorProbRule,
                               settings: SimulationSettings) -> OperatingCharacteristics:
    """Monte Carlo version: draw ``theta`` from the prior, then the count."""
    _check_n(n)
    parts = map_replications(_claim_chunk, (prior, n, settings.master_seed), int(settings.replications),
                             settings.parallelism)
    x = np.concatenate(parts)
    reject = _claim_region(prior, n, rule)[x]
    ones = np.ones(x.size, dtype=np.int64)
    batch = ReplicationBatch(reject, ones, ones * n)
    return summarize(batch, 1, settings, prior_claim_probability(prior, n, rule))


# ---------------------------------------------------------------------------
# sample-size search
# ---------------------------------------------------------------------------

NOT_FOUND = "NOT_FOUND"

REMEDIATION = (
    "no candidate sample size meets both requirements; consider a broader range of "
    "candidate sizes, revisiting alpha and beta with the regulator, a different "
    "threshold lambda, or different fitting-prior hyper-parameters"
)


@dataclass(frozen=True)
class SampleSizeSearchSpec:
    candidates: tuple
    requirements: ErrorRequirements = ErrorRequirements()
    null_scenario: ScenarioSpec = ScenarioSpec((0.12,), ScenarioLabel.NULL_BOUNDARY)
    alt_scenario: ScenarioSpec = ScenarioSpec((0.05,), ScenarioLabel.ALTERNATIVE)

    def __post_init__(self):
        c = tuple(int(v) for v in self.candidates)
        if not c:
            raise ValueError("candidates must be nonempty")
        if any(b <= a for a, b in zip(c, c[1:])):
            raise ValueError("candidates must be strictly ascending")
        for v in c:
            _check_n(v, "candidate")
        object.__setattr__(self, "candidates", c)


@dataclass(frozen=True)
class SearchRow:
    n: int
    type1: OperatingCharacteristics
    power: OperatingCharacteristics
    meets: bool


@dataclass(frozen=True)
class SampleSizeResult:
    chosen: Union[int, str]
    rows: tuple
    message: str

    @property
    def found(self) -> bool:
        return self.chosen != NOT_FOUND


def _exact_oc(design, scenario: ScenarioSpec, settings: SimulationSettings) -> OperatingCharacteristics:
    """Operating characteristics from an enumeration oracle, shaped like a Monte
    Carlo result with zero width."""
    if isinstance(design, GsdBinaryDesign):
        res = exact_oc_gsd(design, scenario.theta)
        p, pet, en, per = res.reject_prob, res.pet, res.expected_n, res.per_stage
    else:
        p = exact_oc_binary(design, scenario.theta)
        pet, en, per = 0.0, float(design.total_n), (p,)
    return OperatingCharacteristics(p, p, p, pet, en, per, 0, 0, settings.master_seed, p)


def has_exact_oracle(design) -> bool:
    return isinstance(design, (SingleBinaryDesign, BorrowingBinaryDesign, GsdBinaryDesign))


def evaluate(design, scenario: ScenarioSpec, settings: SimulationSettings, exact: bool = False) -> OperatingCharacteristics:
    """Exact oracle when requested and available, Monte Carlo otherwise."""
    if exact and has_exact_oracle(design):
        return _exact_oc(design, scenario, settings)
    return estimate_oc(design, scenario, settings, with_exact=has_exact_oracle(design))


def search_sample_size(search: SampleSizeSearchSpec, template, settings: SimulationSettings,
                       exact: bool = False) -> SampleSizeResult:
    """Smallest candidate whose type I error and power meet the requirements.

    Requirements are judged on point estimates; the rows carry the intervals.
    Candidates are evaluated in ascending order and the search stops at the
    first one that qualifies.
    """
    if not hasattr(template, "with_n"):
        raise TypeError(f"{type(template).__name__} cannot be resized for a sample-size search")
    req = search.requirements
    rows = []
    for n in search.candidates:
        design = template.with_n(n)
        t1 = evaluate(design, search.null_scenario, settings, exact)
        pw = evaluate(design, search.alt_scenario, settings, exact)
        meets = t1.reject_rate <= req.alpha and pw.reject_rate >= req.power
        rows.append(SearchRow(n, t1, pw, meets))
        if meets:
            return SampleSizeResult(n, tuple(rows), f"selected N={n}")
    return SampleSizeResult(NOT_FOUND, tuple(rows), REMEDIATION)
