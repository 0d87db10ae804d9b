"""Boolean and robust semantics over discrete-time traces.

Both semantics share one evaluator that produces the value of a formula at
every step ``t = 0..T`` at once. Temporal windows ``t + I`` are clipped to the
trace, so unbounded operators see the remaining horizon only. Robust values
use ``+inf``/``-inf`` for true/false; Boolean values use numpy bools with
``min``/``max`` as and/or.

For ``a U_I b`` the inner infimum runs over the open interval ``(t, t'')``
by default (``until_inner="open"``); ``"closed"`` uses ``[t, t'']``.
"""
from __future__ import annotations

import dataclasses

import numpy as np

from .formula import (
    And, Eventually, FalseF, Formula, Globally, Not, Or, Pred, Release, TrueF, Until,
    formula_length, is_bounded,
)
from .trace import Trace

UNTIL_INNER = ("open", "closed")


class TraceTooShort(ValueError):
    def __init__(self, needed: int, have: int):
        super().__init__(f"formula needs {needed} steps, trace has {have}")
        self.needed = needed
        self.have = have


class _Lattice:
    def __init__(self, top, bottom, dtype, leaf, negate):
        self.top, self.bottom, self.dtype = top, bottom, dtype
        self.leaf, self.negate = leaf, negate


_ROBUST = _Lattice(np.inf, -np.inf, float, lambda atom, s: atom.signed_distance(s), np.negative)
_BOOLEAN = _Lattice(True, False, bool, lambda atom, s: atom.holds(s), np.logical_not)


def _shift(sig: np.ndarray, k: int, fill) -> np.ndarray:
    """``out[..., t] = sig[..., t + k]``, or ``fill`` past the end."""
    out = np.full_like(sig, fill)
    n = sig.shape[-1]
    if k < n:
        out[..., : n - k] = sig[..., k:]
    return out


def _window(itv, n):
    hi = n - 1 if itv.hi is None else min(itv.hi, n - 1)
    return range(itv.lo, hi + 1)


def _signal(f: Formula, states: np.ndarray, lat: _Lattice, inner: str) -> np.ndarray:
    shape = states.shape[:-1]
    if isinstance(f, TrueF):
        return np.full(shape, lat.top, dtype=lat.dtype)
    if isinstance(f, FalseF):
        return np.full(shape, lat.bottom, dtype=lat.dtype)
    if isinstance(f, Pred):
        return np.asarray(lat.leaf(f.atom, states), dtype=lat.dtype)
    if isinstance(f, Not):
        return lat.negate(_signal(f.arg, states, lat, inner))
    if isinstance(f, And):
        return np.minimum(_signal(f.left, states, lat, inner), _signal(f.right, states, lat, inner))
    if isinstance(f, Or):
        return np.maximum(_signal(f.left, states, lat, inner), _signal(f.right, states, lat, inner))
    if isinstance(f, (Eventually, Globally)):
        arg = _signal(f.arg, states, lat, inner)
        op, fill = (np.maximum, lat.bottom) if isinstance(f, Eventually) else (np.minimum, lat.top)
        if f.interval.hi is None:
            # suffix aggregate from t + lo to the end of the trace
            shifted = _shift(arg, f.interval.lo, fill)
            return op.accumulate(shifted[..., ::-1], axis=-1)[..., ::-1]
        acc = np.full(shape, fill, dtype=lat.dtype)
        for k in _window(f.interval, shape[-1]):
            acc = op(acc, _shift(arg, k, fill))
        return acc
    if isinstance(f, (Until, Release)):
        left = _signal(f.left, states, lat, inner)
        right = _signal(f.right, states, lat, inner)
        return _until(f, left, right, lat, inner)
    raise TypeError(f"not a formula: {f!r}")


def _until(f, left, right, lat, inner):
    shape = left.shape
    until = isinstance(f, Until)
    # Until: sup_k min(right[t+k], inf_j left[t+j]); Release swaps the roles of min/max
    outer, comb = (np.maximum, np.minimum) if until else (np.minimum, np.maximum)
    empty_outer = lat.bottom if until else lat.top
    empty_inner = lat.top if until else lat.bottom
    acc = np.full(shape, empty_outer, dtype=lat.dtype)
    # running inner aggregate over the left operand for the current offset k
    run = np.full(shape, empty_inner, dtype=lat.dtype)
    window = _window(f.interval, shape[-1])
    for k in range(0, window.stop):
        if inner == "closed":
            run = comb(run, _shift(left, k, empty_inner))
        elif k >= 2:
            run = comb(run, _shift(left, k - 1, empty_inner))
        if k >= window.start:
            # past the trace end the shifted right operand is the neutral element
            acc = outer(acc, comb(_shift(right, k, empty_outer), run))
    return acc


def _check(f: Formula, x: Trace, t: int, inner: str):
    if inner not in UNTIL_INNER:
        raise ValueError(f"until_inner must be one of {UNTIL_INNER}")
    if t < 0:
        raise ValueError("time step must be nonnegative")
    needed = t + (formula_length(f) if is_bounded(f) else 0) + 1
    if needed > len(x):
        raise TraceTooShort(needed, len(x))


def _states(x) -> np.ndarray:
    return x.states if isinstance(x, Trace) else np.asarray(x, dtype=float)


def robustness_signal(f: Formula, x, until_inner: str = "open") -> np.ndarray:
    """Robust semantics at every step, with windows clipped to the trace.

    ``x`` is a :class:`Trace` or a stack of state arrays shaped
    ``(..., steps, dim)``; the result drops the last axis.
    """
    return _signal(f, _states(x), _ROBUST, until_inner)


def boolean_signal(f: Formula, x, until_inner: str = "open") -> np.ndarray:
    return _signal(f, _states(x), _BOOLEAN, until_inner)


def robustness(f: Formula, x: Trace, t: int = 0, until_inner: str = "open") -> float:
    """Robust semantics of ``f`` on ``x`` at step ``t``."""
    _check(f, x, t, until_inner)
    return float(robustness_signal(f, x, until_inner)[t])


def boolean_sat(f: Formula, x: Trace, t: int = 0, until_inner: str = "open") -> bool:
    """Boolean semantics of ``f`` on ``x`` at step ``t``."""
    _check(f, x, t, until_inner)
    return bool(boolean_signal(f, x, until_inner)[t])


@dataclasses.dataclass(frozen=True)
class Verdict:
    satisfied: bool
    robustness: float
    marginal: bool  # robustness exactly zero
    horizon_clipped: bool  # unbounded operators were cut at the trace end
    until_inner: str


def evaluate(f: Formula, x: Trace, t: int = 0, until_inner: str = "open") -> Verdict:
    rho = robustness(f, x, t, until_inner)
    return Verdict(
        satisfied=boolean_sat(f, x, t, until_inner),
        robustness=rho,
        marginal=rho == 0.0,
        horizon_clipped=not is_bounded(f),
        until_inner=until_inner,
    )
