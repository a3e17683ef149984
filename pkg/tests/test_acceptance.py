"""Acceptance checks, one group per criterion.

Run with ``pytest tests/test_acceptance.py``; the terminal summary prints a
PASS/FAIL line for each criterion (see ``conftest.py``).
"""

import math
import time
from importlib import resources

import numpy as np
import pytest

import test_properties as props
from bayestrial import decision_rules as dr
from bayestrial.config import load_config
from bayestrial.designs import (
    ADVERSE_EVENT_GOAL,
    BorrowingBinaryDesign,
    FutilitySurvivalDesign,
    GsdBinaryDesign,
    MultiplicityDesign,
    SingleBinaryDesign,
    TdfDesign,
    exact_oc_binary,
    exact_oc_gsd,
    prior_claim_probability,
    run_multiplicity,
    run_tdf_design,
)
from bayestrial.engine import SimulationSettings, estimate_oc
from bayestrial.stats_dist import BetaParams
from bayestrial.trial_model import ScenarioSpec

CONFIGS = resources.files("bayestrial") / "configs"
NULL, ALT = ScenarioSpec(0.12), ScenarioSpec(0.05)
PRIORS = {"noninformative": BetaParams(1, 1), "optimistic": BetaParams(0.8, 16), "pessimistic": BetaParams(3.5, 20)}


def config(name):
    return load_config(str(CONFIGS / f"{name}.json"))


# ---------------------------------------------------------------------------
# 1. single-stage table
# ---------------------------------------------------------------------------

# (type I, power) per design and N
TABLE1 = {
    "noninformative": {100: (0.0148, 0.6181), 150: (0.0231, 0.8690), 200: (0.0164, 0.9184)},
    "optimistic": {100: (0.0755, 0.8767), 150: (0.0448, 0.9268), 200: (0.0467, 0.9767)},
    "pessimistic": {100: (0.0155, 0.6214), 150: (0.0114, 0.7843), 200: (0.0158, 0.9231)},
    "ztest": {100: (0.0155, 0.6214), 150: (0.0242, 0.8690), 200: (0.0158, 0.9231)},
}


def table1_design(kind, n):
    if kind == "ztest":
        return SingleBinaryDesign(n, test="ztest")
    return SingleBinaryDesign(n, prior=PRIORS[kind])


@pytest.mark.criterion(1)
@pytest.mark.parametrize("kind", list(TABLE1))
@pytest.mark.parametrize("n", [100, 150, 200])
def test_single_stage_exact_cells(kind, n):
    t1, pw = TABLE1[kind][n]
    d = table1_design(kind, n)
    assert exact_oc_binary(d, 0.12) == pytest.approx(t1, abs=0.006)
    assert exact_oc_binary(d, 0.05) == pytest.approx(pw, abs=0.013)


@pytest.mark.criterion(1)
def test_single_stage_monte_carlo_and_runtime():
    start = time.perf_counter()
    settings = SimulationSettings(replications=10_000)
    misses = []
    for kind in TABLE1:
        for n in (100, 150, 200):
            d = table1_design(kind, n)
            for sc in (NULL, ALT):
                oc = estimate_oc(d, sc, settings, with_exact=True)
                if abs(oc.reject_rate - oc.exact) > 3 * oc.wilson_se():
                    misses.append((kind, n, sc.theta, oc.reject_rate, oc.exact))
    elapsed = time.perf_counter() - start
    assert not misses
    assert elapsed < 5.0


# ---------------------------------------------------------------------------
# 2. prior probability of the claim
# ---------------------------------------------------------------------------

# trial size adopted after sweeping N over {100, 150, 200}
CLAIM_N = 100
TABLE2 = [((1, 1), 0.058), ((1, 9), 0.471), ((1, 19), 0.773), ((1, 49), 0.991)]


@pytest.mark.criterion(2)
@pytest.mark.parametrize("prior,target", TABLE2, ids=[f"Beta{p}" for p, _ in TABLE2])
def test_prior_claim(prior, target):
    rule = dr.PosteriorProbRule(ADVERSE_EVENT_GOAL, 0.975)
    start = time.perf_counter()
    value = prior_claim_probability(BetaParams(*prior), CLAIM_N, rule)
    assert time.perf_counter() - start < 1.0
    assert value == pytest.approx(target, abs=0.01)


# ---------------------------------------------------------------------------
# 3. two-stage group sequential table
# ---------------------------------------------------------------------------

# N1, N2, E(N), PET (both under the alternative), type I, power
TABLE3 = [
    (32, 76, 108, 0.0000, 0.0199, 0.7053),
    (54, 54, 105, 0.0603, 0.0220, 0.6945),
    (76, 32, 100, 0.2632, 0.0219, 0.7094),
    (49, 113, 153, 0.0819, 0.0200, 0.8865),
    (81, 81, 145, 0.2202, 0.0228, 0.8862),
    (113, 49, 146, 0.3348, 0.0208, 0.8860),
    (65, 151, 191, 0.1659, 0.0219, 0.9598),
    (108, 108, 177, 0.3642, 0.0205, 0.9570),
    (151, 65, 183, 0.5120, 0.0197, 0.9568),
]


@pytest.mark.criterion(3)
def test_group_sequential_table():
    start = time.perf_counter()
    for n1, n2, en, pet, t1, pw in TABLE3:
        d = GsdBinaryDesign((n1, n2), (0.996, 0.978))
        null, alt = exact_oc_gsd(d, 0.12), exact_oc_gsd(d, 0.05)
        assert null.reject_prob == pytest.approx(t1, abs=0.006), (n1, n2)
        assert alt.reject_prob == pytest.approx(pw, abs=0.013), (n1, n2)
        assert alt.pet == pytest.approx(pet, abs=0.02), (n1, n2)
        assert alt.expected_n == pytest.approx(en, abs=2), (n1, n2)
    assert time.perf_counter() - start < 5.0


@pytest.mark.criterion(3)
def test_group_sequential_config_matches_table():
    cfg = config("table3_gsd")
    assert [d.stage_sizes for d in cfg.designs] == [(r[0], r[1]) for r in TABLE3]


# ---------------------------------------------------------------------------
# 4. futility design
# ---------------------------------------------------------------------------

THETAS = (0.5, 0.55, 0.6, 0.65, 0.7)
TABLE4 = {  # theta: (reject, E(N), PET) for gamma1 = 0.05, N1 = 30
    0.5: (0.017, 70.11, 0.427),
    0.55: (0.116, 84.18, 0.226),
    0.6: (0.441, 93.98, 0.086),
    0.65: (0.818, 98.32, 0.024),
    0.7: (0.975, 99.58, 0.006),
}


@pytest.mark.criterion(4)
def test_futility_rows():
    start = time.perf_counter()
    d = FutilitySurvivalDesign(n=100, n1=30, gamma1=0.05)
    settings = SimulationSettings(replications=2000)
    for theta in THETAS:
        rej, en, pet = TABLE4[theta]
        oc = estimate_oc(d, ScenarioSpec(theta), settings)
        assert oc.reject_rate == pytest.approx(rej, abs=0.02), theta
        assert oc.pet == pytest.approx(pet, abs=0.04), theta
        assert oc.expected_n == pytest.approx(en, abs=3), theta
    assert time.perf_counter() - start < 600


@pytest.mark.criterion(4)
@pytest.mark.parametrize("theta,target", [(0.5, 0.0185), (0.7, 0.9793)])
def test_single_stage_greenwood_reference(theta, target):
    d = FutilitySurvivalDesign().single_stage()
    oc = estimate_oc(d, ScenarioSpec(theta), SimulationSettings(replications=10_000))
    assert oc.reject_rate == pytest.approx(target, abs=0.012)


# ---------------------------------------------------------------------------
# 5. t degrees of freedom
# ---------------------------------------------------------------------------


@pytest.mark.criterion(5)
@pytest.mark.parametrize("n,target", [(100, 0.0155), (500, 0.0171)])
def test_tdf_type_one(n, target):
    start = time.perf_counter()
    oc = run_tdf_design(TdfDesign(n=n), ScenarioSpec(5.0), SimulationSettings(replications=2000, inner_samples=1000))
    assert oc.reject_rate == pytest.approx(target, abs=0.012)
    assert time.perf_counter() - start < 900


# ---------------------------------------------------------------------------
# 6. large-N washout
# ---------------------------------------------------------------------------


@pytest.mark.criterion(6)
@pytest.mark.parametrize("kind", list(PRIORS))
def test_large_n_type_one(kind):
    start = time.perf_counter()
    p = exact_oc_binary(SingleBinaryDesign(25_000, prior=PRIORS[kind]), 0.12)
    assert 0.020 <= p <= 0.030
    assert time.perf_counter() - start < 10.0


# ---------------------------------------------------------------------------
# 7. fixed p-vector
# ---------------------------------------------------------------------------


@pytest.mark.criterion(7)
def test_fixed_pvector():
    p = dr.PValueVector((0.006, 0.013, 0.008, 0.0255))
    assert dr.rejected_endpoints(dr.bonferroni(p, 0.025)) == {1}
    assert dr.rejected_endpoints(dr.holm(p, 0.025)) == {1, 3}
    assert dr.rejected_endpoints(dr.hochberg(p, 0.025)) == {1, 3}


# ---------------------------------------------------------------------------
# 8. multiplicity family
# ---------------------------------------------------------------------------

MULT_SETTINGS = SimulationSettings(replications=1000)


@pytest.mark.criterion(8)
@pytest.mark.parametrize("k", [2, 5])
def test_familywise_error(k):
    res = run_multiplicity(MultiplicityDesign(k=k, n_per=(100,)), ScenarioSpec(0.35), MULT_SETTINGS)
    for m, r in res.items():
        se = math.sqrt(r.fwer * (1 - r.fwer) / r.replications)
        assert r.fwer <= 0.025 + 3 * se, m


@pytest.mark.criterion(8)
def test_conjunctive_power():
    start = time.perf_counter()
    res = run_multiplicity(MultiplicityDesign(k=5, n_per=(100,)), ScenarioSpec(0.5), MULT_SETTINGS)
    bhm, bon = res["BHM"].conjunctive, res["BONFERRONI"].conjunctive
    R = MULT_SETTINGS.replications
    se = math.sqrt((bhm * (1 - bhm) + bon * (1 - bon)) / R)
    assert bhm - bon > 3 * se
    assert res["HOCHBERG"].conjunctive >= res["HOLM"].conjunctive >= bon
    assert time.perf_counter() - start < 1800


# ---------------------------------------------------------------------------
# 9. power-prior borrowing
# ---------------------------------------------------------------------------


@pytest.mark.criterion(9)
def test_borrowing_without_pilot_weight():
    d = config("fig9a_borrow_optimistic").design
    assert exact_oc_binary(d, 0.12) == pytest.approx(0.0225, abs=0.003)
    assert exact_oc_binary(d, 0.05) == pytest.approx(0.8681, abs=0.003)


@pytest.mark.criterion(9)
@pytest.mark.parametrize("name,sign", [("fig9a_borrow_optimistic", 1), ("fig9b_borrow_pessimistic", -1)])
def test_borrowing_monotone(name, sign):
    cfg = config(name)
    template = cfg.design
    grid = [float(a) for a in cfg.extra["a0_grid"]]
    for theta in (0.12, 0.05):
        vals = [exact_oc_binary(BorrowingBinaryDesign(template.n, template.pilot, a0), theta) for a0 in grid]
        assert all(sign * (b - a) >= 0 for a, b in zip(vals, vals[1:])), (name, theta)


# ---------------------------------------------------------------------------
# 10. property suites (shared with test_properties.py)
# ---------------------------------------------------------------------------


@pytest.mark.criterion(10)
def test_properties_oracle_vs_monte_carlo():
    for i in range(50):
        props.test_oracle_matches_monte_carlo(i)


@pytest.mark.criterion(10)
def test_properties_futility_dominance():
    for i in range(20):
        props.test_futility_dominance_per_seed(i)


@pytest.mark.criterion(10)
def test_properties_procedure_inclusion():
    props.test_procedure_inclusion_10000_vectors()


@pytest.mark.criterion(10)
def test_properties_prior_reproduction():
    props.test_ess_prior_reproduction()
    props.test_bhm_prior_reproduction()


@pytest.mark.criterion(10)
def test_properties_scheduler_independence():
    props.test_worker_count_does_not_change_results(GsdBinaryDesign((81, 81), (0.996, 0.978)), 0.05, 5000)
    props.test_worker_count_does_not_change_results(FutilitySurvivalDesign(), 0.6, 64)
