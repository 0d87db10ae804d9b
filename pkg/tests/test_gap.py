import numpy as np
import pytest

from stlrisk.gap import (
    Comparison, ConstantBound, DisturbanceBounds, GainNotKInfinity, HorizonExceeded, IissGain,
    LipschitzConstants, LipschitzSchedule, NormNotContractive, PairMismatch, StochasticBound,
    compare_controllers, gamma_samples, gap_bound_constraint, gap_bound_stl, iiss_delta,
    linear_iiss_gain, lipschitz_delta, lipschitz_fixed_point, stochastic_gap, trace_differences,
)
from stlrisk.risk import RiskQuery, SampleSet, cvar_upper_bound, var_upper_bound
from stlrisk.stl import Trace

SCALAR = LipschitzConstants(0.5, 1, 1, 1, 0.5, 1)


# Lipschitz schedule


def test_zero_forcing_gives_zero_schedule():
    s = lipschitz_delta(SCALAR, DisturbanceBounds(0, 0), 10)
    assert np.all(s.delta == 0)


def test_hand_iterated_schedule():
    s = lipschitz_delta(SCALAR, DisturbanceBounds(0.0, 0.1), 3)
    assert s.delta.tolist() == pytest.approx([0.0, 0.1, 0.2, 0.3], abs=1e-12)


def test_schedule_nondecreasing_for_random_constants():
    rng = np.random.default_rng(0)
    for _ in range(300):
        lip = LipschitzConstants(*rng.uniform(0, 2, size=6))
        s = lipschitz_delta(lip, DisturbanceBounds(*rng.uniform(0, 1, size=2)), 30)
        assert s.delta[0] == 0
        assert np.all(np.diff(s.delta) >= 0)


def test_schedule_converges_to_fixed_point():
    lip = LipschitzConstants(0.3, 0.8, 1.2, 0.5, 0.9, 2.0)
    dist = DisturbanceBounds(0.2, 0.05)
    s = lipschitz_delta(lip, dist, 400)
    assert s.delta[-1] == pytest.approx(lipschitz_fixed_point(lip, dist), abs=1e-9)
    assert lipschitz_fixed_point(LipschitzConstants(1, 0, 1, 0, 0, 0), dist) == float("inf")


def test_disturbance_bounds_from_max_norms():
    d = DisturbanceBounds.from_max_norms(0.1, 0.05)
    assert (d.v_star, d.w_star) == (0.2, 0.1)
    with pytest.raises(ValueError):
        DisturbanceBounds(-1, 0)
    with pytest.raises(ValueError):
        LipschitzConstants(0, 0, 0, -1, 0, 0)


def test_schedule_horizon():
    s = lipschitz_delta(SCALAR, DisturbanceBounds(0, 0.1), 3)
    assert s.horizon == 3
    with pytest.raises(HorizonExceeded):
        s.at(4)


# iISS


def test_iiss_linear_gain():
    assert iiss_delta(IissGain(k=2.0), 0.5).delta == 1.0
    assert iiss_delta(IissGain(k=2.0), 0.0).delta == 0.0


def test_linear_iiss_gain_half_identity():
    gain = linear_iiss_gain(0.5 * np.eye(3))
    assert gain.k == pytest.approx(2.0)
    assert iiss_delta(gain, 1.2).delta == pytest.approx(2.4)


def test_linear_iiss_gain_uses_two_norm():
    assert linear_iiss_gain(np.diag([0.9, 0.3])).k == pytest.approx(10.0)


def test_example_matrix_is_not_contractive():
    a = np.array([[0.9186, 0.3357], [-0.3257, 0.3429]])
    assert max(abs(np.linalg.eigvals(a))) < 0.66
    with pytest.raises(NormNotContractive) as info:
        linear_iiss_gain(a)
    # high-precision SVD gives 1.0000788..., just above one
    assert info.value.norm == pytest.approx(1.0000788281, abs=1e-9)
    assert info.value.norm > 1


def test_tabulated_gain():
    gain = IissGain(points=((0, 0), (1, 3), (2, 4)))
    assert gain(0.5) == pytest.approx(1.5)
    assert iiss_delta(gain, 1.5).delta == pytest.approx(3.5)
    with pytest.raises(ValueError):
        gain(3.0)


@pytest.mark.parametrize("points", [
    ((0, 0.1), (1, 1)),
    ((0, 0), (1, 1), (2, 1)),
    ((0, 0), (1, 2), (0.5, 3)),
    ((0, 0),),
])
def test_tabulated_gain_must_be_class_k_infinity(points):
    with pytest.raises(GainNotKInfinity):
        IissGain(points=points)


def test_gain_needs_one_form():
    with pytest.raises(ValueError):
        IissGain()
    with pytest.raises(GainNotKInfinity):
        IissGain(k=-1)


# trace differences


def test_gamma_identical_pairs_are_zero():
    x = Trace(np.random.default_rng(1).normal(size=(5, 3)))
    assert gamma_samples([(x, x)] * 4).values.tolist() == [0.0] * 4


def test_gamma_constant_offset():
    rng = np.random.default_rng(2)
    pairs = []
    for _ in range(5):
        x = rng.normal(size=(6, 2))
        pairs.append((Trace(x), Trace(x + np.array([0.0, -0.7]))))
    assert gamma_samples(pairs).values == pytest.approx([0.7] * 5)


def test_gamma_matches_loop_oracle():
    rng = np.random.default_rng(3)
    pairs = [(rng.normal(size=(7, 3)), rng.normal(size=(7, 3))) for _ in range(20)]
    want = [max(np.sqrt(sum((b[t, i] - a[t, i]) ** 2 for i in range(3))) for t in range(7)) for a, b in pairs]
    assert gamma_samples(pairs).values == pytest.approx(want, abs=1e-12)


def test_gamma_weights():
    a = np.zeros((2, 2))
    b = np.array([[3.0, 4.0], [0.0, 0.0]])
    assert gamma_samples([(a, b)]).values[0] == 5.0
    assert gamma_samples([(a, b)], weights=[1.0, 0.0]).values[0] == 3.0
    assert trace_differences(a[None], b[None], [4.0, 0.0])[0] == 6.0


def test_gamma_pair_mismatch():
    with pytest.raises(PairMismatch):
        gamma_samples([(np.zeros((3, 2)), np.zeros((4, 2)))])


# gap bounds


def test_gap_constant():
    assert gap_bound_constraint(-0.5, ConstantBound(0.2)) == pytest.approx(-0.3)


def test_gap_schedule_uses_delta_t():
    schedule = LipschitzSchedule(np.array([0.0, 0.1, 0.3]))
    assert gap_bound_constraint(0.1, schedule) == pytest.approx(0.4)
    assert gap_bound_constraint(0.1, schedule, horizon=1) == pytest.approx(0.2)
    with pytest.raises(HorizonExceeded):
        gap_bound_constraint(0.1, schedule, horizon=5)


def test_gap_stochastic_constant_gamma():
    gamma = StochasticBound(SampleSet([0.25] * 1000, support_bound=0.25))
    q = RiskQuery(0.9, 0.05)
    for metric in ("VaR", "CVaR"):
        assert gap_bound_constraint(-1.0, gamma, q, metric=metric) == pytest.approx(-0.75)


def test_gap_stochastic_needs_query():
    with pytest.raises(ValueError):
        gap_bound_constraint(0.0, StochasticBound(SampleSet([0.1])))


def test_stochastic_bound_rejects_negative_samples():
    with pytest.raises(ValueError):
        StochasticBound(SampleSet([-0.1, 0.2]))


def test_stl_gap_bounds():
    schedule = lipschitz_delta(SCALAR, DisturbanceBounds(0.0, 0.1), 5)
    assert gap_bound_stl(0.7, schedule, 0, 0) == 0.7
    assert gap_bound_stl(0.0, schedule, 0, 3) == pytest.approx(0.3)
    assert gap_bound_stl(0.0, schedule, 2, 3) == pytest.approx(schedule.delta[5])
    with pytest.raises(HorizonExceeded):
        gap_bound_stl(0.0, schedule, 3, 3)
    assert gap_bound_stl(1.0, ConstantBound(0.5), 7, 100) == 1.5


def test_r_gamma_never_exceeds_sup_gamma():
    rng = np.random.default_rng(4)
    q = RiskQuery(0.9, 0.05)
    for _ in range(100):
        g = SampleSet(rng.exponential(size=2000))
        for metric in ("VaR", "CVaR"):
            assert stochastic_gap(g, metric, q, "point") <= g.sorted[-1]
        assert stochastic_gap(g, "VaR", q, "upper") <= g.sorted[-1]
        with_b = g.with_support_bound(g.sorted[-1])
        assert stochastic_gap(with_b, "CVaR", q, "upper") <= g.sorted[-1] + 1e-12


def test_stochastic_gap_upper_uses_bounds():
    g = SampleSet(np.linspace(0, 1, 3000), support_bound=1.0)
    q = RiskQuery(0.9, 0.05)
    assert stochastic_gap(g, "VaR", q) == var_upper_bound(g, q).upper_bound
    assert stochastic_gap(g, "CVaR", q) == cvar_upper_bound(g, q).upper_bound
    with pytest.raises(ValueError):
        stochastic_gap(g, "VaR", q, "median")


# controller comparison


def test_compare_examples():
    assert compare_controllers(0.1, 0.5, 0.15) is Comparison.CERTIFIED
    assert compare_controllers(0.1, 0.5, 0.25) is Comparison.INCONCLUSIVE
    assert compare_controllers(0.3, 0.3, 0.0) is Comparison.CERTIFIED
    with pytest.raises(ValueError):
        compare_controllers(0.0, 1.0, -0.1)
