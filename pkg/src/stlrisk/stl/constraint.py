"""Pointwise constraint specifications ``c(x(t)) >= 0 for all t in the horizon``."""
from __future__ import annotations

import dataclasses
from typing import Optional, Tuple

import numpy as np

from .predicates import PredicateAtom
from .trace import Trace


class EmptyHorizon(ValueError):
    pass


@dataclasses.dataclass(frozen=True)
class ConstraintSpec:
    atom: PredicateAtom
    horizon: Optional[Tuple[int, int]] = None  # inclusive step range; None = whole trace

    def steps(self, n_steps: int) -> slice:
        if self.horizon is None:
            return slice(0, n_steps)
        lo, hi = self.horizon
        if lo < 0 or hi < lo or hi >= n_steps:
            raise EmptyHorizon(f"horizon {self.horizon} outside a trace of {n_steps} steps")
        return slice(lo, hi + 1)


def signed_distance(c: ConstraintSpec, state) -> float:
    """Distance to the constraint boundary, negative when the constraint is violated."""
    return float(c.atom.signed_distance(np.asarray(state, dtype=float)))


def trace_robustness(c: ConstraintSpec, x) -> float:
    """Worst signed distance over the horizon."""
    states = x.states if isinstance(x, Trace) else np.asarray(x, dtype=float)
    window = states[c.steps(states.shape[0])]
    if window.shape[0] == 0:
        raise EmptyHorizon("no steps to evaluate")
    return float(np.min(c.atom.signed_distance(window)))


def batch_trace_robustness(c: ConstraintSpec, states: np.ndarray) -> np.ndarray:
    """``trace_robustness`` for a stack of traces shaped ``(batch, steps, dim)``."""
    window = states[:, c.steps(states.shape[1])]
    return np.min(c.atom.signed_distance(window), axis=-1)
