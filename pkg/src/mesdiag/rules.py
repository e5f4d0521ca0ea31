"""
Oriented rewrite rules and the built-in rule sets M, F and GM.

F has twelve rules in three groups: the monoidal group (alpha, l, r), the
braiding group (tau, gamma), and seven structural rules that manage the s
gate.  M is the monoidal group alone.  GM is F with the `ssm` rule reversed
and the `sms` rule dropped; it is the known non-confluent variant.
"""

from __future__ import annotations

from dataclasses import dataclass

from .diagram import Diagram, ParseError, parse


@dataclass(frozen=True)
class Rule:
    name: str
    lhs: Diagram
    rhs: Diagram
    structural: bool = False

    def __post_init__(self):
        if self.lhs.inputs != self.rhs.inputs or self.lhs.outputs != self.rhs.outputs:
            raise ValueError(f"rule {self.name}: sides must share arities")
        if self.lhs.gate_count() == 0:
            raise ValueError(f"rule {self.name}: empty left-hand side")

    def reversed(self) -> "Rule":
        return Rule(self.name + "_rev", self.rhs, self.lhs, self.structural)

    def __str__(self) -> str:
        tag = " structural" if self.structural else ""
        return f"{self.name}{tag} : {self.lhs.to_expr()} => {self.rhs.to_expr()}"


@dataclass(frozen=True)
class RuleSet:
    name: str
    rules: tuple[Rule, ...]

    def __getitem__(self, name: str) -> Rule:
        for r in self.rules:
            if r.name == name:
                return r
        raise KeyError(name)

    def index(self, name: str) -> int:
        for i, r in enumerate(self.rules):
            if r.name == name:
                return i
        raise KeyError(name)

    def __iter__(self):
        return iter(self.rules)

    def __len__(self):
        return len(self.rules)


def _r(name: str, lhs: str, rhs: str, structural: bool = False) -> Rule:
    return Rule(name, parse(lhs), parse(rhs), structural)


ALPHA = _r("alpha", "(m * id1) ; m", "(id1 * m) ; m")
L = _r("l", "(e * id1) ; m", "id1")
R = _r("r", "(id1 * e) ; m", "id1")
TAU = _r("tau", "s ; m", "m")
GAMMA = _r("gamma", "(s * id1) ; (id1 * m) ; m", "(id1 * m) ; m")

SS = _r("ss", "s ; s", "id2", structural=True)
YB = _r("yb", "(s * id1) ; (id1 * s) ; (s * id1)",
        "(id1 * s) ; (s * id1) ; (id1 * s)", structural=True)
ES = _r("es", "(e * id1) ; s", "id1 * e", structural=True)
SE = _r("se", "(id1 * e) ; s", "e * id1", structural=True)
MS = _r("ms", "(m * id1) ; s", "(id1 * s) ; (s * id1) ; (id1 * m)", structural=True)
SSM = _r("ssm", "(s * id1) ; (id1 * s) ; (m * id1)", "(id1 * m) ; s", structural=True)
SMS = _r("sms", "(s * id1) ; (id1 * m) ; s", "(id1 * s) ; (m * id1)", structural=True)

M_RULES = RuleSet("M", (ALPHA, L, R))
F_RULES = RuleSet("F", (ALPHA, L, R, TAU, GAMMA, SS, YB, ES, SE, MS, SSM, SMS))
GM_RULES = RuleSet("GM", (ALPHA, L, R, TAU, GAMMA, SS, YB, ES, SE, MS, SSM.reversed()))

STRUCTURAL_RULES = RuleSet("structural", (SS, YB, ES, SE, MS, SSM, SMS))

BUILTIN = {"M": M_RULES, "F": F_RULES, "GM": GM_RULES}


def builtin(name: str) -> RuleSet:
    try:
        return BUILTIN[name]
    except KeyError:
        raise KeyError(f"unknown rule set {name!r}; builtins are M, F, GM") from None


def parse_rule_line(line: str) -> Rule:
    """One rule per line: `NAME [structural] : <d> => <d>`."""
    head, _, body = line.partition(":")
    if not body:
        raise ParseError(f"missing ':' in rule line {line!r}")
    words = head.split()
    if not words or len(words) > 2 or (len(words) == 2 and words[1] != "structural"):
        raise ParseError(f"bad rule header {head!r}")
    lhs_text, sep, rhs_text = body.partition("=>")
    if not sep:
        raise ParseError(f"missing '=>' in rule line {line!r}")
    return Rule(words[0], parse(lhs_text), parse(rhs_text), len(words) == 2)


def parse_rule_file(text: str, name: str = "user") -> RuleSet:
    rules = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            rules.append(parse_rule_line(line))
    return RuleSet(name, tuple(rules))
