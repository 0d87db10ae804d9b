"""Signal temporal logic: formulas, constraints, Boolean and robust semantics."""
from .constraint import (
    ConstraintSpec, EmptyHorizon, batch_trace_robustness, signed_distance, trace_robustness,
)
from .formula import (
    And, Eventually, FalseF, Formula, Globally, Interval, Not, Or, Pred, Release, TrueF,
    UnboundedFormula, Until, formula_length, is_bounded, is_pnf, to_pnf, to_text,
)
from .parser import (
    FormulaSyntaxError, UnknownPredicate, load_predicate_table, parse_formula,
    predicate_table_from_dict,
)
from .predicates import (
    AxisBox, DimensionMismatch, Functional, Halfspace, NormBall, PredicateAtom, UnknownFunction,
    atom_from_dict, atom_to_dict, register_function,
)
from .semantics import (
    TraceTooShort, Verdict, boolean_sat, boolean_signal, evaluate, robustness,
    robustness_signal,
)
from .trace import Trace

__all__ = [name for name in dir() if not name.startswith("_")]
