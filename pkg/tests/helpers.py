"""Shared test oracles: a direct-recursion STL evaluator and random formula corpora.

The reference evaluator follows the pointwise recursive definitions literally,
one (formula, step) at a time, with plain Python floats. It shares no code
with the vectorised evaluator in ``stlrisk.stl.semantics``.
"""
from __future__ import annotations

import math

import numpy as np

from stlrisk.stl import (
    And, AxisBox, Eventually, Globally, Halfspace, Interval, Not, NormBall, Or, Pred,
    PredicateAtom, Release, TrueF, Until,
)
from stlrisk.stl.formula import FalseF

ATOMS = {
    "A": PredicateAtom("A", Halfspace([1.0, 0.0], 0.0)),
    "B": PredicateAtom("B", Halfspace([0.0, 2.0], 0.5)),
    "C": PredicateAtom("C", AxisBox([-1.0, -1.0], [1.0, 0.5])),
    "D": PredicateAtom("D", NormBall([0.5, 0.0], 1.0)),
    "E": PredicateAtom("E", NormBall([0.0, 0.5], 0.8, "Linf")),
}


# ---------------------------------------------------------------------------
# reference semantics


def _atom_value(atom, state):
    """Scalar signed distance written out per shape (independent of the library)."""
    x = [float(v) for v in state]
    s = atom.shape
    if isinstance(s, Halfspace):
        norm = math.sqrt(sum(a * a for a in s.a))
        d = (sum(a * xi for a, xi in zip(s.a, x)) - s.b) / norm
    elif isinstance(s, AxisBox) or (isinstance(s, NormBall) and s.norm == "Linf"):
        if isinstance(s, AxisBox):
            lo, hi = s.lo, s.hi
        else:
            lo = [c - s.radius for c in s.center]
            hi = [c + s.radius for c in s.center]
        inside = all(l <= xi <= h for l, xi, h in zip(lo, x, hi))
        if inside:
            d = min(min(xi - l, h - xi) for l, xi, h in zip(lo, x, hi))
        else:
            d = -math.sqrt(sum(max(l - xi, 0.0, xi - h) ** 2 for l, xi, h in zip(lo, x, hi)))
    else:
        d = s.radius - math.sqrt(sum((xi - c) ** 2 for xi, c in zip(x, s.center)))
    return -d if atom.negated else d


def _atom_holds(atom, state):
    x = [float(v) for v in state]
    s = atom.shape
    if isinstance(s, Halfspace):
        inside = sum(a * xi for a, xi in zip(s.a, x)) - s.b >= 0
    elif isinstance(s, AxisBox):
        inside = all(l <= xi <= h for l, xi, h in zip(s.lo, x, s.hi))
    elif s.norm == "Linf":
        inside = all(abs(xi - c) <= s.radius for xi, c in zip(x, s.center))
    else:
        inside = math.sqrt(sum((xi - c) ** 2 for xi, c in zip(x, s.center))) <= s.radius
    return (not inside) if atom.negated else inside


def _times(itv, t, last):
    hi = last if itv.hi is None else min(t + itv.hi, last)
    return range(t + itv.lo, hi + 1)


def ref_robustness(f, states, t, inner="open"):
    """rho^f(x, t) by direct recursion; F and G go through their Until definitions."""
    last = len(states) - 1
    if isinstance(f, TrueF):
        return math.inf
    if isinstance(f, FalseF):
        return -math.inf
    if isinstance(f, Pred):
        return _atom_value(f.atom, states[t])
    if isinstance(f, Not):
        return -ref_robustness(f.arg, states, t, inner)
    if isinstance(f, And):
        return min(ref_robustness(f.left, states, t, inner), ref_robustness(f.right, states, t, inner))
    if isinstance(f, Or):
        return max(ref_robustness(f.left, states, t, inner), ref_robustness(f.right, states, t, inner))
    if isinstance(f, Eventually):
        return ref_robustness(Until(f.interval, TrueF(), f.arg), states, t, inner)
    if isinstance(f, Globally):
        return -ref_robustness(Eventually(f.interval, Not(f.arg)), states, t, inner)
    if isinstance(f, Release):
        return -ref_robustness(Until(f.interval, Not(f.left), Not(f.right)), states, t, inner)
    if isinstance(f, Until):
        best = -math.inf
        for t2 in _times(f.interval, t, last):
            lo = t + 1 if inner == "open" else t
            worst = math.inf
            for t1 in range(lo, t2 if inner == "open" else t2 + 1):
                worst = min(worst, ref_robustness(f.left, states, t1, inner))
            best = max(best, min(ref_robustness(f.right, states, t2, inner), worst))
        return best
    raise TypeError(f)


def ref_boolean(f, states, t, inner="open"):
    last = len(states) - 1
    if isinstance(f, TrueF):
        return True
    if isinstance(f, FalseF):
        return False
    if isinstance(f, Pred):
        return _atom_holds(f.atom, states[t])
    if isinstance(f, Not):
        return not ref_boolean(f.arg, states, t, inner)
    if isinstance(f, And):
        return ref_boolean(f.left, states, t, inner) and ref_boolean(f.right, states, t, inner)
    if isinstance(f, Or):
        return ref_boolean(f.left, states, t, inner) or ref_boolean(f.right, states, t, inner)
    if isinstance(f, Eventually):
        return ref_boolean(Until(f.interval, TrueF(), f.arg), states, t, inner)
    if isinstance(f, Globally):
        return not ref_boolean(Eventually(f.interval, Not(f.arg)), states, t, inner)
    if isinstance(f, Release):
        return not ref_boolean(Until(f.interval, Not(f.left), Not(f.right)), states, t, inner)
    if isinstance(f, Until):
        for t2 in _times(f.interval, t, last):
            lo = t + 1 if inner == "open" else t
            hi = t2 if inner == "open" else t2 + 1
            if ref_boolean(f.right, states, t2, inner) and all(
                ref_boolean(f.left, states, t1, inner) for t1 in range(lo, hi)
            ):
                return True
        return False
    raise TypeError(f)


# ---------------------------------------------------------------------------
# random corpora


def random_interval(rng, allow_unbounded=True):
    lo = int(rng.integers(0, 3))
    if allow_unbounded and rng.random() < 0.15:
        return Interval(lo, None)
    return Interval(lo, lo + int(rng.integers(0, 3)))


def random_formula(rng, depth=3, allow_unbounded=True):
    """Random formula of nesting depth at most ``depth`` over :data:`ATOMS`."""
    if depth == 0 or rng.random() < 0.25:
        if rng.random() < 0.05:
            return TrueF()
        return Pred(ATOMS[str(rng.choice(list(ATOMS)))])
    kind = int(rng.integers(0, 7))
    sub = lambda: random_formula(rng, depth - 1, allow_unbounded)  # noqa: E731
    if kind == 0:
        return Not(sub())
    if kind == 1:
        return And(sub(), sub())
    if kind == 2:
        return Or(sub(), sub())
    if kind == 3:
        return Until(random_interval(rng, allow_unbounded), sub(), sub())
    if kind == 4:
        return Eventually(random_interval(rng, allow_unbounded), sub())
    if kind == 5:
        return Globally(random_interval(rng, allow_unbounded), sub())
    return Release(random_interval(rng, allow_unbounded), sub(), sub())


def random_states(rng, steps, quantized=False):
    """2-D trace; ``quantized`` values on a 0.25 grid make ties and boundary hits likely."""
    x = rng.uniform(-2.0, 2.0, size=(steps, 2))
    return np.round(x * 4) / 4 if quantized else x
