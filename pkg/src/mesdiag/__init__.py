"""Rewriting engine and coherence toolkit for monochrome string diagrams."""

from .diagram import (
    ArityMismatch,
    CapacityExceeded,
    Diagram,
    DiagramError,
    MalformedDiagram,
    ParseError,
    canonical_form,
    enumerate_diagrams,
    equals,
    gate,
    identity,
    par_compose,
    parse,
    seq_compose,
)
from .rules import BUILTIN, F_RULES, GM_RULES, M_RULES, Rule, RuleSet, builtin
from .rewrite import (
    BudgetExhausted,
    Redex,
    RewritePath,
    RewriteStep,
    StaleRedex,
    apply_redex,
    find_redexes,
    normalize,
    structural_normal_form,
)

__all__ = [
    "ArityMismatch",
    "BudgetExhausted",
    "CapacityExceeded",
    "Diagram",
    "DiagramError",
    "MalformedDiagram",
    "ParseError",
    "Redex",
    "RewritePath",
    "RewriteStep",
    "Rule",
    "RuleSet",
    "StaleRedex",
    "BUILTIN",
    "F_RULES",
    "GM_RULES",
    "M_RULES",
    "apply_redex",
    "builtin",
    "canonical_form",
    "enumerate_diagrams",
    "equals",
    "find_redexes",
    "gate",
    "identity",
    "normalize",
    "par_compose",
    "parse",
    "seq_compose",
    "structural_normal_form",
]
