"""Recursive-descent parser for the ASCII formula grammar.

Grammar, loosest binding first::

    formula  := implies
    implies  := or ('->' implies)?
    or       := and ('|' and)*
    and      := until ('&' until)*
    until    := unary (('U' | 'R') interval? unary)*
    unary    := '!' unary | ('F' | 'G') interval? unary | atom
    atom     := 'T' | IDENT | '(' formula ')'
    interval := '[' INT ',' (INT | 'inf') ']'

A temporal operator without an interval is unbounded. ``a -> b`` is sugar
for ``!a | b``.
"""
from __future__ import annotations

import json
import re
from importlib import resources
from typing import Dict, List, Mapping, Tuple

from .formula import (
    And, Eventually, Formula, Globally, Interval, Not, Or, Pred, Release, TrueF, Until,
)
from .predicates import PredicateAtom, atom_from_dict


class FormulaSyntaxError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class UnknownPredicate(KeyError):
    def __init__(self, name: str):
        super().__init__(name)
        self.name = name


_TOKEN = re.compile(
    r"\s*(?:(?P<arrow>->)|(?P<num>\d+)|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)|(?P<sym>[!&|()\[\],]))"
)
_KEYWORDS = {"T", "F", "G", "U", "R"}


def _tokenize(text: str) -> List[Tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None:
            bad = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise FormulaSyntaxError(f"unexpected character {text[bad]!r}", bad)
        kind = m.lastgroup
        value = m.group(kind)
        start = m.start(kind)
        if kind == "ident" and value in _KEYWORDS:
            kind = "kw"
        tokens.append((kind, value, start))
        pos = m.end()
    tokens.append(("eof", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, table: Mapping[str, PredicateAtom]):
        self.tokens = _tokenize(text)
        self.i = 0
        self.table = table

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, v, pos = self.take()
        if v != value:
            raise FormulaSyntaxError(f"expected {value!r}, got {v or 'end of input'!r}", pos)

    def parse(self) -> Formula:
        f = self.implies()
        kind, v, pos = self.peek()
        if kind != "eof":
            raise FormulaSyntaxError(f"unexpected {v!r}", pos)
        return f

    def implies(self) -> Formula:
        left = self.disj()
        if self.peek()[0] == "arrow":
            self.take()
            return Or(Not(left), self.implies())
        return left

    def disj(self) -> Formula:
        f = self.conj()
        while self.peek()[1] == "|":
            self.take()
            f = Or(f, self.conj())
        return f

    def conj(self) -> Formula:
        f = self.until()
        while self.peek()[1] == "&":
            self.take()
            f = And(f, self.until())
        return f

    def until(self) -> Formula:
        f = self.unary()
        while self.peek()[0] == "kw" and self.peek()[1] in ("U", "R"):
            op = self.take()[1]
            itv = self.interval()
            right = self.unary()
            f = Until(itv, f, right) if op == "U" else Release(itv, f, right)
        return f

    def unary(self) -> Formula:
        kind, v, pos = self.peek()
        if v == "!":
            self.take()
            return Not(self.unary())
        if kind == "kw" and v in ("F", "G"):
            self.take()
            itv = self.interval()
            arg = self.unary()
            return Eventually(itv, arg) if v == "F" else Globally(itv, arg)
        return self.atom()

    def atom(self) -> Formula:
        kind, v, pos = self.take()
        if kind == "kw" and v == "T":
            return TrueF()
        if kind == "ident":
            try:
                return Pred(self.table[v])
            except KeyError:
                raise UnknownPredicate(v) from None
        if v == "(":
            f = self.implies()
            self.expect(")")
            return f
        raise FormulaSyntaxError(f"unexpected {v or 'end of input'!r}", pos)

    def interval(self) -> Interval:
        if self.peek()[1] != "[":
            return Interval(0, None)
        _, _, start = self.take()
        lo = self._int()
        self.expect(",")
        kind, v, pos = self.peek()
        if kind == "ident" and v == "inf":
            self.take()
            hi = None
        else:
            hi = self._int()
        self.expect("]")
        if hi is not None and hi < lo:
            raise FormulaSyntaxError(f"empty interval [{lo},{hi}]", start)
        return Interval(lo, hi)

    def _int(self) -> int:
        kind, v, pos = self.take()
        if kind != "num":
            raise FormulaSyntaxError(f"expected a step count, got {v or 'end of input'!r}", pos)
        return int(v)


def parse_formula(text: str, predicate_table: Mapping[str, PredicateAtom]) -> Formula:
    """Parse ``text`` into a formula, resolving identifiers through ``predicate_table``."""
    return _Parser(text, predicate_table).parse()


def _schema() -> dict:
    return json.loads(resources.files("stlrisk.schemas").joinpath("predicate_table.schema.json").read_text())


def predicate_table_from_dict(data: Mapping) -> Dict[str, PredicateAtom]:
    import jsonschema

    jsonschema.validate(data, _schema())
    return {name: atom_from_dict(name, spec) for name, spec in data.items()}


def load_predicate_table(path) -> Dict[str, PredicateAtom]:
    with open(path, encoding="utf-8") as fh:
        return predicate_table_from_dict(json.load(fh))
