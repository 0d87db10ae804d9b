"""Trajectory-error bounds and the risk verification gap they imply.

If every realization of a perturbed system stays within ``Delta`` of the
nominal one, then the risk of the perturbed robustness cost exceeds the
nominal risk by at most ``Delta`` for any monotone, translation-invariant
risk metric. This module produces such ``Delta``s (a Lipschitz recursion, an
iISS gain, or paired trace-difference samples) and applies them.
"""
from __future__ import annotations

import dataclasses
import enum
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np

from . import risk
from .risk import RiskQuery, SampleSet
from .stl.trace import Trace


class GainNotKInfinity(ValueError):
    pass


class NormNotContractive(ValueError):
    def __init__(self, norm: float):
        super().__init__(f"induced 2-norm {norm:.6g} >= 1; the geometric series bound does not apply")
        self.norm = norm


class PairMismatch(ValueError):
    pass


class HorizonExceeded(ValueError):
    pass


@dataclasses.dataclass(frozen=True)
class LipschitzConstants:
    """Lipschitz constants of ``f(x, u, v)`` (``l_f1..3``), the controller ``u``
    and the observation map ``g(x, w)`` (``l_g1``, ``l_g2``)."""

    l_f1: float
    l_f2: float
    l_f3: float
    l_u: float
    l_g1: float
    l_g2: float

    def __post_init__(self):
        for field in dataclasses.fields(self):
            if getattr(self, field.name) < 0:
                raise ValueError(f"{field.name} must be nonnegative")

    @property
    def growth(self) -> float:
        """Per-step amplification ``l_f1 + l_f2 l_u l_g1``."""
        return self.l_f1 + self.l_f2 * self.l_u * self.l_g1


@dataclasses.dataclass(frozen=True)
class DisturbanceBounds:
    """Diameters of the process (``v_star``) and measurement (``w_star``) disturbance sets."""

    v_star: float
    w_star: float

    def __post_init__(self):
        if self.v_star < 0 or self.w_star < 0:
            raise ValueError("disturbance bounds must be nonnegative")

    @classmethod
    def from_max_norms(cls, v_max: float, w_max: float) -> "DisturbanceBounds":
        """``v* = 2 max ||v||`` and ``w* = 2 max ||w||``."""
        return cls(2.0 * v_max, 2.0 * w_max)


@dataclasses.dataclass(frozen=True)
class LipschitzSchedule:
    delta: np.ndarray  # Delta(t) for t = 0..T

    @property
    def horizon(self) -> int:
        return len(self.delta) - 1

    def at(self, t: int) -> float:
        if not 0 <= t <= self.horizon:
            raise HorizonExceeded(f"step {t} outside the schedule horizon {self.horizon}")
        return float(self.delta[t])


@dataclasses.dataclass(frozen=True)
class ConstantBound:
    delta: float
    source: str = "assumed"  # "iiss" or "assumed"

    def __post_init__(self):
        if self.delta < 0:
            raise ValueError("Delta must be nonnegative")

    def at(self, t: int) -> float:
        return self.delta


@dataclasses.dataclass(frozen=True)
class StochasticBound:
    gamma: SampleSet  # one trace difference per paired realization

    def __post_init__(self):
        if self.gamma.sorted[0] < 0:
            raise ValueError("trace differences must be nonnegative")


GapBound = Union[LipschitzSchedule, ConstantBound, StochasticBound]


def lipschitz_delta(lip: LipschitzConstants, dist: DisturbanceBounds, horizon: int) -> LipschitzSchedule:
    """Worst-case trajectory error ``Delta(t)``, ``t = 0..horizon``, from ``Delta(0) = 0``."""
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    delta = np.zeros(horizon + 1)
    for t in range(horizon):
        delta[t + 1] = (
            lip.l_f1 * delta[t]
            + lip.l_f2 * lip.l_u * (lip.l_g1 * delta[t] + lip.l_g2 * dist.w_star)
            + lip.l_f3 * dist.v_star
        )
    delta.setflags(write=False)
    return LipschitzSchedule(delta)


def lipschitz_fixed_point(lip: LipschitzConstants, dist: DisturbanceBounds) -> float:
    """Limit of ``Delta(t)`` when the per-step growth is below one."""
    if lip.growth >= 1:
        return float("inf")
    forcing = lip.l_f2 * lip.l_u * lip.l_g2 * dist.w_star + lip.l_f3 * dist.v_star
    return forcing / (1.0 - lip.growth)


@dataclasses.dataclass(frozen=True)
class IissGain:
    """Class-K-infinity gain, either ``k * s`` or piecewise linear through ``points``."""

    k: Optional[float] = None
    points: Optional[Tuple[Tuple[float, float], ...]] = None

    def __post_init__(self):
        if (self.k is None) == (self.points is None):
            raise ValueError("give exactly one of k or points")
        if self.k is not None and self.k < 0:
            raise GainNotKInfinity("linear gain must be nonnegative")
        if self.points is not None:
            pts = np.asarray(self.points, dtype=float)
            if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
                raise GainNotKInfinity("tabulated gain needs at least two (s, gamma) pairs")
            if pts[0, 0] != 0 or pts[0, 1] != 0:
                raise GainNotKInfinity("tabulated gain must start at gamma(0) = 0")
            if np.any(np.diff(pts[:, 0]) <= 0) or np.any(np.diff(pts[:, 1]) <= 0):
                raise GainNotKInfinity("tabulated gain must be strictly increasing")
            object.__setattr__(self, "points", tuple(map(tuple, pts.tolist())))

    def __call__(self, s: float) -> float:
        if s < 0:
            raise ValueError("gain argument must be nonnegative")
        if self.k is not None:
            return self.k * s
        pts = np.asarray(self.points)
        if s > pts[-1, 0]:
            raise ValueError(f"gain tabulated only up to {pts[-1, 0]:.6g}")
        return float(np.interp(s, pts[:, 0], pts[:, 1]))


def linear_iiss_gain(a_cl) -> IissGain:
    """Gain ``1 / (1 - ||A_cl||_2)`` of ``x+ = A_cl x + d``.

    Needs an induced 2-norm below one; spectral radius below one is not enough.
    """
    a = np.atleast_2d(np.asarray(a_cl, dtype=float))
    if a.shape[0] != a.shape[1]:
        raise ValueError("closed-loop matrix must be square")
    norm = float(np.linalg.norm(a, 2))
    if norm >= 1:
        raise NormNotContractive(norm)
    return IissGain(k=1.0 / (1.0 - norm))


def iiss_delta(gain: IissGain, d_diameter: float) -> ConstantBound:
    """Time-independent ``Delta = gamma(diameter of the disturbance set)``."""
    if d_diameter < 0:
        raise ValueError("diameter must be nonnegative")
    return ConstantBound(gain(d_diameter), source="iiss")


def _trace_states(x) -> np.ndarray:
    return x.states if isinstance(x, Trace) else np.asarray(x, dtype=float)


def trace_differences(nominal: np.ndarray, perturbed: np.ndarray, weights=None) -> np.ndarray:
    """Per-pair ``max_t ||x_bar(t) - x(t)||`` for stacks shaped ``(pairs, steps, dim)``."""
    nominal = np.asarray(nominal, dtype=float)
    perturbed = np.asarray(perturbed, dtype=float)
    if nominal.shape != perturbed.shape:
        raise PairMismatch(f"paired traces differ in shape: {nominal.shape} vs {perturbed.shape}")
    diff = perturbed - nominal
    if weights is not None:
        diff = diff * np.sqrt(np.asarray(weights, dtype=float))
    return np.max(np.linalg.norm(diff, axis=-1), axis=-1)


def gamma_samples(pairs: Iterable[Tuple[Trace, Trace]], weights: Optional[Sequence[float]] = None) -> SampleSet:
    """One trace-difference sample per (nominal, perturbed) pair.

    ``weights`` scales each state coordinate's squared difference
    (Euclidean norm when omitted).
    """
    out = []
    for i, (nom, per) in enumerate(pairs):
        a, b = _trace_states(nom), _trace_states(per)
        if a.shape != b.shape:
            raise PairMismatch(f"pair {i}: shapes {a.shape} and {b.shape} differ")
        out.append(trace_differences(a[None], b[None], weights)[0])
    if not out:
        raise ValueError("no trace pairs given")
    return SampleSet(out)


def stochastic_gap(gamma: SampleSet, metric: str, query: RiskQuery, estimator: str = "upper",
                   convention: str = "tail") -> float:
    """``R(Gamma)``: the risk of the trace-difference samples.

    ``estimator="upper"`` uses the high-confidence upper bound (the CVaR bound
    needs ``gamma.support_bound``); ``"point"`` uses the plug-in estimate.
    """
    if estimator == "point":
        return risk.point_estimate(gamma, metric, query.beta)
    if estimator != "upper":
        raise ValueError("estimator must be 'upper' or 'point'")
    est = risk.estimate(gamma, metric, query, convention)
    return est.point if est.upper_bound is None else est.upper_bound


def gap_bound_constraint(nominal_risk: float, bound: GapBound, risk_query: Optional[RiskQuery] = None,
                         horizon: Optional[int] = None, metric: str = "VaR",
                         estimator: str = "upper") -> float:
    """Upper bound on the perturbed system's constraint-robustness risk.

    ``horizon`` is the last step ``T`` of the constraint; a Lipschitz schedule
    contributes ``Delta(T)`` and defaults to its own horizon.
    """
    if isinstance(bound, ConstantBound):
        return nominal_risk + bound.delta
    if isinstance(bound, LipschitzSchedule):
        return nominal_risk + bound.at(bound.horizon if horizon is None else horizon)
    if isinstance(bound, StochasticBound):
        if risk_query is None:
            raise ValueError("the stochastic bound needs a risk query")
        return nominal_risk + stochastic_gap(bound.gamma, metric, risk_query, estimator)
    raise TypeError(f"not a gap bound: {bound!r}")


def gap_bound_stl(nominal_risk_at_t: float, schedule: Union[LipschitzSchedule, ConstantBound],
                  t: int, formula_len: int) -> float:
    """Bound for a bounded STL formula in positive normal form evaluated at step ``t``.

    The caller is responsible for having normalized the formula (see
    :func:`stlrisk.stl.to_pnf`).
    """
    if isinstance(schedule, ConstantBound):
        return nominal_risk_at_t + schedule.delta
    return nominal_risk_at_t + schedule.at(t + formula_len)


class Comparison(enum.Enum):
    CERTIFIED = "Certified"
    INCONCLUSIVE = "Inconclusive"


def compare_controllers(risk_1: float, risk_2: float, delta: float) -> Comparison:
    """Certify that controller 1 is no riskier than controller 2 on the perturbed system.

    Holds when ``risk_1 <= risk_2 - 2 delta``; anything else is inconclusive.
    """
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    return Comparison.CERTIFIED if risk_1 <= risk_2 - 2.0 * delta else Comparison.INCONCLUSIVE
