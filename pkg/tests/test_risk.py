import math

import mpmath
import numpy as np
import pytest

from stlrisk.risk import (
    DeltaOutOfRange, InsufficientSamples, MissingSupportBound, RiskQuery, SampleSet,
    confidence_margin, cvar_upper_bound, empirical_cdf, empirical_cvar, empirical_var, estimate,
    mean_risk, point_estimate, var_upper_bound, worst_case_risk,
)

ONE_TO_TEN = SampleSet(np.arange(1, 11))


# SampleSet


def test_sample_set_rejects_nan_and_empty():
    with pytest.raises(ValueError):
        SampleSet([1.0, float("nan")])
    with pytest.raises(ValueError):
        SampleSet([])


def test_sample_set_support_bound_checked():
    with pytest.raises(ValueError):
        SampleSet([0.5, 2.0], support_bound=1.0)


def test_sample_set_is_immutable_and_sorted():
    s = SampleSet([3.0, 1.0, 2.0])
    assert s.sorted.tolist() == [1.0, 2.0, 3.0]
    assert s.values.tolist() == [3.0, 1.0, 2.0]
    with pytest.raises(AttributeError):
        s.support_bound = 1.0
    with pytest.raises(ValueError):
        s.values[0] = 0.0


def test_sample_csv_round_trip(tmp_path):
    s = SampleSet([0.1, -2.5, 1.0 / 3.0])
    s.to_csv(tmp_path / "z.csv")
    assert SampleSet.from_csv(tmp_path / "z.csv").values.tolist() == s.values.tolist()
    (tmp_path / "plain.csv").write_text("1.5\n2.5\n")
    assert SampleSet.from_csv(tmp_path / "plain.csv").values.tolist() == [1.5, 2.5]


# empirical CDF and VaR


def test_cdf_examples():
    assert empirical_cdf(ONE_TO_TEN, 9) == 0.9
    assert empirical_cdf(ONE_TO_TEN, 0.5) == 0.0
    assert empirical_cdf(ONE_TO_TEN, 10) == 1.0


def test_var_examples():
    assert empirical_var(ONE_TO_TEN, 0.9) == 9
    assert empirical_var(ONE_TO_TEN, 1.0) == 10
    assert empirical_var(SampleSet([7.0]), 0.3) == 7.0


def test_var_is_inf_of_cdf_level_set():
    rng = np.random.default_rng(0)
    for _ in range(200):
        s = SampleSet(rng.integers(0, 20, size=int(rng.integers(1, 40))))
        level = float(rng.uniform(0.01, 1.0))
        v = empirical_var(s, level)
        assert empirical_cdf(s, v) >= level
        below = s.sorted[s.sorted < v]
        assert below.size == 0 or empirical_cdf(s, below[-1]) < level


def test_var_level_rounding():
    # 0.7 * 10 is 7.000000000000001 in floating point; the order statistic is still O_7
    assert empirical_var(ONE_TO_TEN, 0.7) == 7


# confidence margin


def _margin_oracle(n, delta):
    mpmath.mp.dps = 50
    return float(mpmath.sqrt(mpmath.log(mpmath.pi**2 * n**2 / (3 * mpmath.mpf(delta))) / (2 * n)))


def test_margin_values():
    assert confidence_margin(1000, 0.05) == pytest.approx(0.09487, abs=5e-6)
    assert confidence_margin(10, 0.05) == pytest.approx(0.663, abs=5e-4)
    for n, d in [(1, 0.5), (500, 0.05), (50_000, 0.01)]:
        assert confidence_margin(n, d) == pytest.approx(_margin_oracle(n, d), rel=1e-14)


def test_margin_grows_as_delta_shrinks():
    assert confidence_margin(100, 0.01) > confidence_margin(100, 0.05) > confidence_margin(100, 0.2)


# VaR bound


def test_var_bound_insufficient_samples():
    with pytest.raises(InsufficientSamples) as info:
        var_upper_bound(ONE_TO_TEN, RiskQuery(0.9, 0.05))
    assert info.value.level == pytest.approx(0.9 + 0.663, abs=1e-3)


def test_var_bound_uniform_level():
    rng = np.random.default_rng(1)
    s = SampleSet(rng.uniform(size=1000))
    est = var_upper_bound(s, RiskQuery(0.9, 0.05))
    assert est.effective_level == pytest.approx(0.9949, abs=1e-4)
    assert est.upper_bound == s.sorted[math.ceil(est.effective_level * 1000) - 1]
    assert est.upper_bound >= est.point == empirical_var(s, 0.9)


def test_var_bound_constant():
    s = SampleSet([2.5] * 2000)
    assert var_upper_bound(s, RiskQuery(0.9, 0.05)).upper_bound == 2.5


# CVaR


def test_cvar_examples():
    assert empirical_cvar(ONE_TO_TEN, 0.9) == 10
    assert empirical_cvar(SampleSet([4.0] * 7), 0.5) == 4.0


def test_cvar_small_beta_tends_to_mean():
    rng = np.random.default_rng(2)
    s = SampleSet(rng.normal(size=50))
    assert empirical_cvar(s, 1e-9) == pytest.approx(mean_risk(s), abs=1e-6)


def test_cvar_matches_brute_force_objective():
    rng = np.random.default_rng(3)
    for _ in range(100):
        z = rng.normal(size=int(rng.integers(1, 30)))
        beta = float(rng.uniform(0.05, 0.95))
        brute = min(a + np.mean(np.maximum(z - a, 0)) / (1 - beta) for a in z)
        assert empirical_cvar(SampleSet(z), beta) == pytest.approx(brute, abs=1e-12)


def test_cvar_matches_tail_average_when_tail_is_whole():
    # beta = 0.8 on 10 samples: CVaR is the mean of the top two
    assert empirical_cvar(ONE_TO_TEN, 0.8) == pytest.approx(9.5)


def test_cvar_bound_constant_samples():
    s = SampleSet([2.0] * 50, support_bound=2.0)
    assert cvar_upper_bound(s, RiskQuery(0.9, 0.05)).upper_bound == 2.0


def test_cvar_bound_hand_example_printed_convention():
    s = SampleSet([0.0], support_bound=1.0)
    est = cvar_upper_bound(s, RiskQuery(0.9, 0.5), convention="printed")
    weight = 1 - math.sqrt(math.log(2) / 2) - 0.1
    assert weight == pytest.approx(0.3112, abs=1e-4)
    assert est.upper_bound == pytest.approx(1 - weight / 0.9, abs=1e-12)
    assert est.upper_bound == pytest.approx(0.6542, abs=1e-4)


def test_cvar_bound_hand_example_tail_convention():
    # tail mass 0.1: the only weight is [1 - 0.589 - 0.9]^+ = 0, so the bound is b
    s = SampleSet([0.0], support_bound=1.0)
    assert cvar_upper_bound(s, RiskQuery(0.9, 0.5)).upper_bound == 1.0


def test_cvar_bound_errors():
    with pytest.raises(MissingSupportBound):
        cvar_upper_bound(ONE_TO_TEN, RiskQuery(0.9, 0.05))
    with pytest.raises(DeltaOutOfRange):
        cvar_upper_bound(ONE_TO_TEN.with_support_bound(10), RiskQuery(0.9, 0.6))
    with pytest.raises(ValueError):
        cvar_upper_bound(ONE_TO_TEN.with_support_bound(10), RiskQuery(0.9, 0.05), convention="other")


def test_cvar_bound_dominates_plug_in():
    rng = np.random.default_rng(4)
    for _ in range(200):
        s = SampleSet(rng.uniform(size=int(rng.integers(1, 300))), support_bound=1.0)
        est = cvar_upper_bound(s, RiskQuery(0.9, 0.05), "tail")
        assert est.upper_bound >= est.point
        # the printed convention bounds the CVaR at level 1 - beta instead
        printed = cvar_upper_bound(s, RiskQuery(0.9, 0.05), "printed")
        assert printed.upper_bound >= empirical_cvar(s, 0.1)


def test_mean_and_worst_case():
    s = SampleSet([1.0, 2.0, 3.0])
    assert mean_risk(s) == 2.0 and worst_case_risk(s) == 3.0
    c = SampleSet([0.4] * 5)
    assert mean_risk(c) == pytest.approx(0.4) and worst_case_risk(c) == 0.4


def test_estimate_dispatch():
    s = SampleSet(np.linspace(0, 1, 2000), support_bound=1.0)
    q = RiskQuery(0.9, 0.05)
    for metric in ("VaR", "CVaR", "Mean", "WorstCase"):
        est = estimate(s, metric, q)
        assert est.metric == metric and est.n == 2000
        assert est.point == point_estimate(s, metric, 0.9)
        if est.upper_bound is not None:
            assert est.upper_bound >= est.point
    with pytest.raises(ValueError):
        estimate(s, "Median", q)


def test_risk_query_validation():
    for beta, delta in [(0.0, 0.05), (1.0, 0.05), (0.9, 0.0), (0.9, 1.0)]:
        with pytest.raises(ValueError):
            RiskQuery(beta, delta)


# coherence properties


def test_translation_and_homogeneity():
    rng = np.random.default_rng(5)
    for _ in range(200):
        z = rng.normal(size=int(rng.integers(1, 60)))
        beta = float(rng.uniform(0.05, 0.95))
        c = float(rng.normal())
        k = float(rng.uniform(0, 5))
        s = SampleSet(z)
        assert empirical_var(SampleSet(z + c), beta) == pytest.approx(empirical_var(s, beta) + c, abs=1e-12)
        assert empirical_cvar(SampleSet(z + c), beta) == pytest.approx(empirical_cvar(s, beta) + c, abs=1e-12)
        assert empirical_var(SampleSet(k * z), beta) == pytest.approx(k * empirical_var(s, beta), abs=1e-12)
        assert empirical_cvar(SampleSet(k * z), beta) == pytest.approx(k * empirical_cvar(s, beta), abs=1e-12)


def test_cvar_at_least_var():
    rng = np.random.default_rng(6)
    for _ in range(300):
        s = SampleSet(rng.standard_t(3, size=int(rng.integers(1, 80))))
        beta = float(rng.uniform(0.01, 0.99))
        assert empirical_cvar(s, beta) >= empirical_var(s, beta) - 1e-12


def test_var_is_not_subadditive():
    # VaR at beta = 0.9 on two independent bets with 0.05 loss probability each
    n = 100
    a = np.zeros(n)
    b = np.zeros(n)
    a[:5] = 1.0
    b[5:10] = 1.0
    assert empirical_var(SampleSet(a + b), 0.91) > empirical_var(SampleSet(a), 0.91) + empirical_var(SampleSet(b), 0.91)


def test_coverage_small_run():
    # a reduced version of the acceptance coverage check: N large enough for the VaR bound
    rng = np.random.default_rng(7)
    hits_var = hits_cvar = 0
    reps = 100
    for _ in range(reps):
        s = SampleSet(rng.uniform(size=2000), support_bound=1.0)
        hits_var += var_upper_bound(s, RiskQuery(0.9, 0.05)).upper_bound >= 0.9
        hits_cvar += cvar_upper_bound(s, RiskQuery(0.9, 0.05)).upper_bound >= 0.95
    assert hits_var >= 93 and hits_cvar >= 93
