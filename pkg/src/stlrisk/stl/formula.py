"""STL abstract syntax over discrete time steps."""
from __future__ import annotations

import dataclasses
from typing import Optional, Union

from .predicates import PredicateAtom


class UnboundedFormula(ValueError):
    """The operation needs every temporal interval to be bounded."""


@dataclasses.dataclass(frozen=True)
class Interval:
    lo: int = 0
    hi: Optional[int] = None  # None means unbounded

    def __post_init__(self):
        if self.lo < 0:
            raise ValueError("interval start must be nonnegative")
        if self.hi is not None and self.hi < self.lo:
            raise ValueError(f"empty interval [{self.lo},{self.hi}]")

    @property
    def bounded(self) -> bool:
        return self.hi is not None


@dataclasses.dataclass(frozen=True)
class TrueF:
    pass


@dataclasses.dataclass(frozen=True)
class FalseF:
    """Constant false. Only produced by ``to_pnf`` from ``!T``."""


@dataclasses.dataclass(frozen=True)
class Pred:
    atom: PredicateAtom


@dataclasses.dataclass(frozen=True)
class Not:
    arg: "Formula"


@dataclasses.dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"


@dataclasses.dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"


@dataclasses.dataclass(frozen=True)
class Until:
    interval: Interval
    left: "Formula"
    right: "Formula"


@dataclasses.dataclass(frozen=True)
class Release:
    """Dual of until: ``a R_I b == !(!a U_I !b)``. Needed to push negations through ``U``."""

    interval: Interval
    left: "Formula"
    right: "Formula"


@dataclasses.dataclass(frozen=True)
class Eventually:
    interval: Interval
    arg: "Formula"


@dataclasses.dataclass(frozen=True)
class Globally:
    interval: Interval
    arg: "Formula"


Formula = Union[TrueF, FalseF, Pred, Not, And, Or, Until, Release, Eventually, Globally]

_BINARY = (And, Or)
_TEMPORAL_BINARY = (Until, Release)
_TEMPORAL_UNARY = (Eventually, Globally)


def children(f: Formula) -> tuple:
    if isinstance(f, Not):
        return (f.arg,)
    if isinstance(f, _BINARY + _TEMPORAL_BINARY):
        return (f.left, f.right)
    if isinstance(f, _TEMPORAL_UNARY):
        return (f.arg,)
    return ()


def is_bounded(f: Formula) -> bool:
    if isinstance(f, _TEMPORAL_BINARY + _TEMPORAL_UNARY) and not f.interval.bounded:
        return False
    return all(is_bounded(c) for c in children(f))


def formula_length(f: Formula) -> int:
    """Number of steps past ``t`` a trace must cover to decide ``f`` at ``t``."""
    if isinstance(f, (TrueF, FalseF, Pred)):
        return 0
    if isinstance(f, Not):
        return formula_length(f.arg)
    if isinstance(f, _BINARY):
        return max(formula_length(f.left), formula_length(f.right))
    if not f.interval.bounded:
        raise UnboundedFormula(to_text(f))
    # F and G are (T U phi) and its dual, so the left operand contributes 0
    if isinstance(f, _TEMPORAL_UNARY):
        return f.interval.hi + formula_length(f.arg)
    return f.interval.hi + max(formula_length(f.left), formula_length(f.right))


def to_pnf(f: Formula) -> Formula:
    """Push every negation down into the predicate atoms."""
    return _pnf(f, False)


def _pnf(f: Formula, neg: bool) -> Formula:
    if isinstance(f, TrueF):
        return FalseF() if neg else f
    if isinstance(f, FalseF):
        return TrueF() if neg else f
    if isinstance(f, Pred):
        return Pred(f.atom.negate()) if neg else f
    if isinstance(f, Not):
        return _pnf(f.arg, not neg)
    if isinstance(f, And):
        cls = Or if neg else And
        return cls(_pnf(f.left, neg), _pnf(f.right, neg))
    if isinstance(f, Or):
        cls = And if neg else Or
        return cls(_pnf(f.left, neg), _pnf(f.right, neg))
    if isinstance(f, Until):
        cls = Release if neg else Until
        return cls(f.interval, _pnf(f.left, neg), _pnf(f.right, neg))
    if isinstance(f, Release):
        cls = Until if neg else Release
        return cls(f.interval, _pnf(f.left, neg), _pnf(f.right, neg))
    if isinstance(f, Eventually):
        cls = Globally if neg else Eventually
        return cls(f.interval, _pnf(f.arg, neg))
    if isinstance(f, Globally):
        cls = Eventually if neg else Globally
        return cls(f.interval, _pnf(f.arg, neg))
    raise TypeError(f"not a formula: {f!r}")


def is_pnf(f: Formula) -> bool:
    if isinstance(f, Not):
        return False
    return all(is_pnf(c) for c in children(f))


def predicates(f: Formula) -> set:
    if isinstance(f, Pred):
        return {f.atom.name}
    out = set()
    for c in children(f):
        out |= predicates(c)
    return out


def to_text(f: Formula) -> str:
    """Pretty-print in the ASCII grammar accepted by :func:`parse_formula`.

    Negated atoms print as ``!name`` and ``FalseF`` as ``!T``; both parse back
    to an explicit ``Not`` node.
    """
    if isinstance(f, TrueF):
        return "T"
    if isinstance(f, FalseF):
        return "!T"
    if isinstance(f, Pred):
        return ("!" if f.atom.negated else "") + f.atom.name
    if isinstance(f, Not):
        return f"!{_wrap(f.arg)}"
    if isinstance(f, And):
        return f"{_wrap(f.left)} & {_wrap(f.right)}"
    if isinstance(f, Or):
        return f"{_wrap(f.left)} | {_wrap(f.right)}"
    if isinstance(f, Until):
        return f"{_wrap(f.left)} U{_itv(f.interval)} {_wrap(f.right)}"
    if isinstance(f, Release):
        return f"{_wrap(f.left)} R{_itv(f.interval)} {_wrap(f.right)}"
    if isinstance(f, Eventually):
        return f"F{_itv(f.interval)} {_wrap(f.arg)}"
    if isinstance(f, Globally):
        return f"G{_itv(f.interval)} {_wrap(f.arg)}"
    raise TypeError(f"not a formula: {f!r}")


def _itv(i: Interval) -> str:
    return "" if i.hi is None and i.lo == 0 else f"[{i.lo},{'inf' if i.hi is None else i.hi}]"


def _wrap(f: Formula) -> str:
    text = to_text(f)
    if isinstance(f, (TrueF, Pred)) and not (isinstance(f, Pred) and f.atom.negated):
        return text
    return f"({text})"
