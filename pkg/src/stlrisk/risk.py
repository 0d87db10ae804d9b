"""VaR and CVaR of robustness costs: plug-in estimates and high-confidence upper bounds.

Costs are ``Z = -rho`` so larger means riskier. Estimators work on the cached
ascending order statistics of a :class:`SampleSet`.
"""
from __future__ import annotations

import dataclasses
import math
from typing import Optional

import numpy as np

CONVENTIONS = ("tail", "printed")


class InsufficientSamples(ValueError):
    """``beta + c_N(delta) > 1``: the sample is too small for the requested bound."""

    def __init__(self, level: float, n: int):
        super().__init__(f"bound needs the empirical quantile at level {level:.6g} > 1 (n={n})")
        self.level = level
        self.n = n


class MissingSupportBound(ValueError):
    pass


class DeltaOutOfRange(ValueError):
    pass


class SampleSet:
    """Immutable batch of cost samples with cached order statistics.

    ``support_bound`` is a known constant ``b`` with ``P(Z <= b) = 1``; the
    CVaR upper bound needs it.
    """

    __slots__ = ("values", "sorted", "support_bound")

    def __init__(self, values, support_bound: Optional[float] = None):
        v = np.array(values, dtype=float).ravel()
        if v.size == 0:
            raise ValueError("a sample set needs at least one value")
        if np.isnan(v).any():
            raise ValueError("sample set contains NaN")
        if support_bound is not None:
            support_bound = float(support_bound)
            if v.max() > support_bound:
                raise ValueError(f"sample {v.max():.6g} exceeds the support bound {support_bound:.6g}")
        s = np.sort(v, kind="stable")
        v.setflags(write=False)
        s.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "sorted", s)
        object.__setattr__(self, "support_bound", support_bound)

    def __setattr__(self, name, value):
        raise AttributeError("SampleSet is immutable")

    def __len__(self):
        return self.values.size

    def __repr__(self):
        return f"SampleSet(n={len(self)}, min={self.sorted[0]:.6g}, max={self.sorted[-1]:.6g})"

    def with_support_bound(self, b: float) -> "SampleSet":
        return SampleSet(self.values, b)

    @classmethod
    def from_csv(cls, path, support_bound: Optional[float] = None) -> "SampleSet":
        """One cost per line, optional header ``z``."""
        with open(path, encoding="utf-8") as fh:
            lines = [ln.strip() for ln in fh if ln.strip()]
        if lines and lines[0].lower() == "z":
            lines = lines[1:]
        return cls([float(ln) for ln in lines], support_bound)

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("z\n")
            for z in self.values:
                fh.write(f"{float(z)!r}\n")


@dataclasses.dataclass(frozen=True)
class RiskQuery:
    beta: float = 0.9
    delta: float = 0.05

    def __post_init__(self):
        if not 0 < self.beta < 1:
            raise ValueError("beta must lie in (0, 1)")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")


@dataclasses.dataclass(frozen=True)
class RiskEstimate:
    metric: str  # "VaR", "CVaR", "Mean" or "WorstCase"
    point: float
    upper_bound: Optional[float]
    effective_level: Optional[float]
    n: int


def empirical_cdf(s: SampleSet, alpha: float) -> float:
    return np.searchsorted(s.sorted, alpha, side="right") / len(s)


def _order_index(level: float, n: int) -> int:
    """Smallest k with k/n >= level, i.e. ceil(level * n) robust to rounding."""
    k = max(1, math.ceil(level * n))
    while k > 1 and (k - 1) / n >= level:
        k -= 1
    while k < n and k / n < level:
        k += 1
    return k


def empirical_var(s: SampleSet, level: float) -> float:
    """``inf{a : F_hat(a) >= level}``, the order statistic ``O_ceil(level*N)``."""
    if not 0 < level <= 1:
        raise ValueError("VaR level must lie in (0, 1]")
    return float(s.sorted[_order_index(level, len(s)) - 1])


def confidence_margin(n: int, delta: float) -> float:
    """Quantile-level inflation ``sqrt(log(pi^2 n^2 / (3 delta)) / (2n))``."""
    if n < 1:
        raise ValueError("n must be positive")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    return math.sqrt(math.log(math.pi**2 * n * n / (3.0 * delta)) / (2.0 * n))


def var_upper_bound(s: SampleSet, q: RiskQuery) -> RiskEstimate:
    """Upper bound on VaR_beta holding with probability at least ``1 - delta``."""
    level = q.beta + confidence_margin(len(s), q.delta)
    if level > 1:
        raise InsufficientSamples(level, len(s))
    return RiskEstimate("VaR", empirical_var(s, q.beta), empirical_var(s, level), level, len(s))


def _ru_objective(s: SampleSet, beta: float) -> np.ndarray:
    o = s.sorted
    n = o.size
    # sum_{j >= i} (o_j - o_i) via suffix sums
    suffix = np.cumsum(o[::-1])[::-1]
    excess = suffix - (n - np.arange(n)) * o
    return o + excess / (n * (1.0 - beta))


def empirical_cvar(s: SampleSet, beta: float) -> float:
    """Plug-in CVaR: ``min_a a + E[(Z - a)^+] / (1 - beta)`` over the order statistics."""
    if not 0 < beta < 1:
        raise ValueError("beta must lie in (0, 1)")
    return float(np.min(_ru_objective(s, beta)))


def cvar_upper_bound(s: SampleSet, q: RiskQuery, convention: str = "tail") -> RiskEstimate:
    """Upper bound on CVaR_beta from order statistics and the support bound ``b``.

    ``b - 1/m * sum_i (O_{i+1} - O_i) [i/N - sqrt(ln(1/delta)/2N) - (1 - m)]^+``
    with ``O_{N+1} = b``. ``m`` is the tail mass: ``1 - beta`` under the
    default ``"tail"`` convention, which bounds the same CVaR_beta that
    :func:`empirical_cvar` estimates. ``convention="printed"`` plugs ``beta``
    in for ``m``, which bounds the CVaR at level ``1 - beta`` instead.
    """
    if s.support_bound is None:
        raise MissingSupportBound("CVaR upper bound needs a support bound b with Z <= b")
    if not 0 < q.delta <= 0.5:
        raise DeltaOutOfRange("CVaR upper bound needs delta in (0, 0.5]")
    if convention not in CONVENTIONS:
        raise ValueError(f"convention must be one of {CONVENTIONS}")
    n = len(s)
    mass = 1.0 - q.beta if convention == "tail" else q.beta
    o = np.append(s.sorted, s.support_bound)
    i = np.arange(1, n + 1)
    weight = np.maximum(i / n - math.sqrt(math.log(1.0 / q.delta) / (2.0 * n)) - (1.0 - mass), 0.0)
    bound = s.support_bound - np.sum(np.diff(o) * weight) / mass
    return RiskEstimate("CVaR", empirical_cvar(s, q.beta), float(bound), None, n)


def mean_risk(s: SampleSet) -> float:
    return float(np.mean(s.values))


def worst_case_risk(s: SampleSet) -> float:
    return float(s.sorted[-1])


def estimate(s: SampleSet, metric: str, q: RiskQuery, convention: str = "tail") -> RiskEstimate:
    """Point estimate plus upper bound for one metric; dispatch used by reports."""
    if metric == "VaR":
        return var_upper_bound(s, q)
    if metric == "CVaR":
        return cvar_upper_bound(s, q, convention)
    if metric == "Mean":
        return RiskEstimate("Mean", mean_risk(s), None, None, len(s))
    if metric == "WorstCase":
        return RiskEstimate("WorstCase", worst_case_risk(s), None, None, len(s))
    raise ValueError(f"unknown metric {metric!r}")


def point_estimate(s: SampleSet, metric: str, beta: float) -> float:
    if metric == "VaR":
        return empirical_var(s, beta)
    if metric == "CVaR":
        return empirical_cvar(s, beta)
    if metric == "Mean":
        return mean_risk(s)
    if metric == "WorstCase":
        return worst_case_risk(s)
    raise ValueError(f"unknown metric {metric!r}")
