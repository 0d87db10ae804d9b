"""Predicate atoms and their signed distances.

Every geometric shape describes a closed set ``O`` in state space. The signed
distance of a state ``x`` is the Euclidean distance to the boundary, positive
when ``x`` lies in ``O`` and negative otherwise. Functional atoms skip the
geometry and use the value of a user supplied scalar function ``h(x)``.
"""
from __future__ import annotations

import dataclasses
from typing import Callable, Dict, Union

import numpy as np


class DimensionMismatch(ValueError):
    """State dimension does not match the predicate."""


class UnknownFunction(KeyError):
    """A functional atom references an unregistered function."""


_FUNCTIONS: Dict[str, Callable[[np.ndarray], np.ndarray]] = {}


def register_function(name: str, fn: Callable[[np.ndarray], np.ndarray]) -> None:
    """Register ``fn`` so functional atoms (and predicate files) can refer to it by name.

    ``fn`` receives an array of states with shape ``(..., n)`` and must return
    an array of shape ``(...)``.
    """
    _FUNCTIONS[name] = fn


def get_function(name: str) -> Callable[[np.ndarray], np.ndarray]:
    try:
        return _FUNCTIONS[name]
    except KeyError:
        raise UnknownFunction(name) from None


def _vec(values) -> tuple:
    return tuple(float(v) for v in np.atleast_1d(np.asarray(values, dtype=float)))


@dataclasses.dataclass(frozen=True)
class Halfspace:
    """``a . x - b >= 0``."""

    a: tuple
    b: float

    def __post_init__(self):
        object.__setattr__(self, "a", _vec(self.a))
        object.__setattr__(self, "b", float(self.b))
        if np.linalg.norm(self.a) <= 0:
            raise ValueError("halfspace normal must be nonzero")

    @property
    def dim(self) -> int:
        return len(self.a)

    def distance(self, states: np.ndarray) -> np.ndarray:
        a = np.asarray(self.a)
        return (states @ a - self.b) / np.linalg.norm(a)

    def contains(self, states: np.ndarray) -> np.ndarray:
        return states @ np.asarray(self.a) - self.b >= 0


@dataclasses.dataclass(frozen=True)
class AxisBox:
    """``lo <= x <= hi`` componentwise."""

    lo: tuple
    hi: tuple

    def __post_init__(self):
        object.__setattr__(self, "lo", _vec(self.lo))
        object.__setattr__(self, "hi", _vec(self.hi))
        if len(self.lo) != len(self.hi):
            raise ValueError("box bounds differ in length")
        if np.any(np.asarray(self.lo) > np.asarray(self.hi)):
            raise ValueError("box requires lo <= hi componentwise")

    @property
    def dim(self) -> int:
        return len(self.lo)

    def distance(self, states: np.ndarray) -> np.ndarray:
        lo, hi = np.asarray(self.lo), np.asarray(self.hi)
        inside = np.minimum(states - lo, hi - states).min(axis=-1)
        outside = np.linalg.norm(states - np.clip(states, lo, hi), axis=-1)
        return np.where(inside >= 0, inside, -outside)

    def contains(self, states: np.ndarray) -> np.ndarray:
        lo, hi = np.asarray(self.lo), np.asarray(self.hi)
        return np.all((states >= lo) & (states <= hi), axis=-1)


@dataclasses.dataclass(frozen=True)
class NormBall:
    """``||x - center|| <= radius`` in the L2 or Linf norm.

    Distances are always Euclidean, so an Linf ball behaves like an axis box.
    """

    center: tuple
    radius: float
    norm: str = "L2"

    def __post_init__(self):
        object.__setattr__(self, "center", _vec(self.center))
        object.__setattr__(self, "radius", float(self.radius))
        if self.radius < 0:
            raise ValueError("ball radius must be nonnegative")
        if self.norm not in ("L2", "Linf"):
            raise ValueError(f"unsupported norm {self.norm!r}")

    @property
    def dim(self) -> int:
        return len(self.center)

    def _box(self) -> AxisBox:
        c = np.asarray(self.center)
        return AxisBox(c - self.radius, c + self.radius)

    def distance(self, states: np.ndarray) -> np.ndarray:
        if self.norm == "Linf":
            return self._box().distance(states)
        return self.radius - np.linalg.norm(states - np.asarray(self.center), axis=-1)

    def contains(self, states: np.ndarray) -> np.ndarray:
        if self.norm == "Linf":
            return self._box().contains(states)
        return np.linalg.norm(states - np.asarray(self.center), axis=-1) <= self.radius


@dataclasses.dataclass(frozen=True)
class Functional:
    """Robustness is ``h(x)`` itself; satisfied where ``h(x) >= 0``.

    ``function`` is a registered name or the callable itself. ``dim`` is
    optional; when given, states are checked against it.
    """

    function: Union[str, Callable[[np.ndarray], np.ndarray]]
    dim: Union[int, None] = None

    def _h(self, states):
        fn = get_function(self.function) if isinstance(self.function, str) else self.function
        return np.asarray(fn(states), dtype=float)

    def distance(self, states: np.ndarray) -> np.ndarray:
        return self._h(states)

    def contains(self, states: np.ndarray) -> np.ndarray:
        return self._h(states) >= 0


Shape = Union[Halfspace, AxisBox, NormBall, Functional]


@dataclasses.dataclass(frozen=True)
class PredicateAtom:
    name: str
    shape: Shape
    negated: bool = False

    def negate(self) -> "PredicateAtom":
        return dataclasses.replace(self, negated=not self.negated)

    def _check(self, states: np.ndarray) -> np.ndarray:
        states = np.asarray(states, dtype=float)
        dim = self.shape.dim
        if dim is not None and states.shape[-1] != dim:
            raise DimensionMismatch(
                f"predicate {self.name!r} expects dimension {dim}, got {states.shape[-1]}"
            )
        return states

    def signed_distance(self, states) -> np.ndarray:
        """Signed distance for one state or a stack of states (last axis is the state)."""
        d = self.shape.distance(self._check(states))
        return -d if self.negated else d

    def holds(self, states) -> np.ndarray:
        inside = self.shape.contains(self._check(states))
        return ~inside if self.negated else inside


def atom_from_dict(name: str, spec: dict) -> PredicateAtom:
    kind = spec["shape"]
    if kind == "halfspace":
        shape = Halfspace(spec["a"], spec["b"])
    elif kind == "axis_box":
        shape = AxisBox(spec["lo"], spec["hi"])
    elif kind == "norm_ball":
        shape = NormBall(spec["center"], spec["radius"], spec.get("norm", "L2"))
    elif kind == "functional":
        shape = Functional(spec["function"], spec.get("dim"))
    else:
        raise ValueError(f"unknown predicate shape {kind!r}")
    return PredicateAtom(name, shape, bool(spec.get("negated", False)))


def atom_to_dict(atom: PredicateAtom) -> dict:
    s = atom.shape
    if isinstance(s, Halfspace):
        out = {"shape": "halfspace", "a": list(s.a), "b": s.b}
    elif isinstance(s, AxisBox):
        out = {"shape": "axis_box", "lo": list(s.lo), "hi": list(s.hi)}
    elif isinstance(s, NormBall):
        out = {"shape": "norm_ball", "center": list(s.center), "radius": s.radius, "norm": s.norm}
    else:
        if not isinstance(s.function, str):
            raise ValueError(f"predicate {atom.name!r} wraps an unregistered callable")
        out = {"shape": "functional", "function": s.function}
        if s.dim is not None:
            out["dim"] = s.dim
    if atom.negated:
        out["negated"] = True
    return out
