"""A short tour of the library, from one STL formula to a risk-gap certificate.

Run with ``python3 demos/walkthrough.py``. Takes a few seconds.
"""
import numpy as np

from stlrisk.gap import (
    DisturbanceBounds, LipschitzConstants, StochasticBound, gap_bound_constraint, lipschitz_delta,
)
from stlrisk.risk import (
    InsufficientSamples, RiskQuery, SampleSet, cvar_upper_bound, empirical_var, var_upper_bound,
)
from stlrisk.sim import (
    BicycleHallway, DroppedRays, ResampleDisturbances, SystemModel, TanhFeedback, TrialConfig,
    paired_monte_carlo, scalar_lipschitz_system, scripted_bicycle_controllers, simulate,
)
from stlrisk.stl import (
    AxisBox, Halfspace, PredicateAtom, Trace, evaluate, formula_length, parse_formula, to_pnf, to_text,
)


def section(title):
    print(f"\n== {title}")


section("STL robustness")
table = {
    "near": PredicateAtom("near", AxisBox([-1.0, -1.0], [1.0, 1.0])),
    "right": PredicateAtom("right", Halfspace([1.0, 0.0], 0.0)),
}
f = parse_formula("G[0,3] near & F[0,4] right", table)
x = Trace(np.array([[-0.5, 0.0], [-0.2, 0.1], [0.1, 0.3], [0.4, 0.2], [0.6, 0.0]]))
v = evaluate(f, x)
print(f"formula      {to_text(f)}")
print(f"PNF          {to_text(to_pnf(parse_formula('!(near & right)', table)))}")
print(f"length       {formula_length(f)} steps")
print(f"verdict      satisfied={v.satisfied} robustness={v.robustness:.3f}")

section("Risk bounds on uniform samples")
rng = np.random.default_rng(0)
q = RiskQuery(beta=0.9, delta=0.05)
for n in (500, 2000):
    s = SampleSet(rng.uniform(size=n), support_bound=1.0)
    try:
        var = f"{var_upper_bound(s, q).upper_bound:.4f}"
    except InsufficientSamples as exc:
        var = f"unavailable ({exc})"
    print(f"N={n:5d}  VaR_0.9 bound {var}")
    print(f"         CVaR_0.9 bound {cvar_upper_bound(s, q).upper_bound:.4f} (true value 0.95)")

section("Lipschitz gap on a scalar system")
plant = scalar_lipschitz_system()
schedule = lipschitz_delta(LipschitzConstants(0.5, 1, 1, 1, 0.5, 1), DisturbanceBounds(0.0, 0.1), 30)
cfg = TrialConfig(master_seed=1, horizon=30)
ctrl = TanhFeedback(1.0)
a = simulate(SystemModel(plant), ctrl, cfg, range(500))
b = simulate(SystemModel(plant, ResampleDisturbances()), ctrl, cfg, range(500))
worst = np.abs(b - a)[..., 0].max(axis=0)
print(f"Delta(1..5)          {np.round(schedule.delta[1:6], 3).tolist()}")
print(f"observed max |diff|  {np.round(worst[1:6], 3).tolist()}")
print(f"schedule respected   {bool(np.all(worst <= schedule.delta))}")

section("Dropped LiDAR rays on the bicycle")
car = BicycleHallway()
ctrl = scripted_bicycle_controllers(car.lidar)["offset_0.25"]
res = paired_monte_carlo(SystemModel(car), SystemModel(car, DroppedRays(5)), ctrl, car.constraint(),
                         1000, TrialConfig(master_seed=2, horizon=150))
nominal_var = var_upper_bound(res.nominal, q).upper_bound
gamma = StochasticBound(res.gamma)
print(f"nominal VaR bound            {nominal_var:.4f}")
print(f"sup Gamma                    {res.gamma.sorted[-1]:.4f}")
print(f"bound via R(Gamma)           {gap_bound_constraint(nominal_var, gamma, q, metric='VaR'):.4f}")
print(f"bound via sup Gamma          {nominal_var + res.gamma.sorted[-1]:.4f}")
print(f"empirical perturbed VaR      {empirical_var(res.perturbed, 0.9):.4f}")
