"""
Termination checking via monotone affine interpretations on positive integers.

Every diagram p -> q is interpreted as an affine map N^p -> N^q with natural
coefficients, built functorially from a per-gate assignment.  A rule decreases
iff its left interpretation strictly dominates the right one in the product
order: every coefficient of the difference is nonnegative and the difference is
not identically zero.  On the domain x_i >= 1 this is exactly "lhs(x) > rhs(x)
at every point", which is well founded, so an all-rules-pass verdict proves
termination.

The default assignment sends m(x,y) to 2x+y, s(x,y) to (x+y, x) and e to 1.
"""

from __future__ import annotations

from dataclasses import dataclass

from .diagram import GATE_IN, GATE_OUT, Diagram
from .rules import Rule, RuleSet


class DimensionMismatch(Exception):
    pass


@dataclass(frozen=True)
class AffineMap:
    """x |-> coeffs @ x + consts, with natural-number entries."""

    in_dim: int
    out_dim: int
    coeffs: tuple[tuple[int, ...], ...]  # out_dim rows, in_dim columns
    consts: tuple[int, ...]

    def __post_init__(self):
        if len(self.coeffs) != self.out_dim or len(self.consts) != self.out_dim:
            raise DimensionMismatch("row count does not match out_dim")
        if any(len(row) != self.in_dim for row in self.coeffs):
            raise DimensionMismatch("column count does not match in_dim")
        if any(c < 0 for row in self.coeffs for c in row) or any(c < 0 for c in self.consts):
            raise ValueError("coefficients must be natural numbers")

    @staticmethod
    def identity(n: int) -> "AffineMap":
        return AffineMap(n, n, tuple(tuple(1 if i == j else 0 for j in range(n))
                                     for i in range(n)), (0,) * n)

    def __call__(self, xs: tuple[int, ...]) -> tuple[int, ...]:
        if len(xs) != self.in_dim:
            raise DimensionMismatch(f"expected {self.in_dim} arguments")
        return tuple(sum(c * x for c, x in zip(row, xs)) + k
                     for row, k in zip(self.coeffs, self.consts))

    def then(self, other: "AffineMap") -> "AffineMap":
        """self followed by other."""
        if other.in_dim != self.out_dim:
            raise DimensionMismatch("cannot compose")
        coeffs = tuple(
            tuple(sum(other.coeffs[i][k] * self.coeffs[k][j] for k in range(self.out_dim))
                  for j in range(self.in_dim))
            for i in range(other.out_dim))
        consts = tuple(
            sum(other.coeffs[i][k] * self.consts[k] for k in range(self.out_dim)) + other.consts[i]
            for i in range(other.out_dim))
        return AffineMap(self.in_dim, other.out_dim, coeffs, consts)

    def beside(self, other: "AffineMap") -> "AffineMap":
        """Direct sum: acts on the left block with self, the right with other."""
        coeffs = tuple(row + (0,) * other.in_dim for row in self.coeffs)
        coeffs += tuple((0,) * self.in_dim + row for row in other.coeffs)
        return AffineMap(self.in_dim + other.in_dim, self.out_dim + other.out_dim,
                         coeffs, self.consts + other.consts)

    def polynomial(self) -> str:
        """Human-readable form, e.g. '(4x+2y+z, 2x+y)' with variables x,y,z,t,..."""
        names = _var_names(self.in_dim)
        rendered = []
        for row, k in zip(self.coeffs, self.consts):
            terms = []
            for c, v in zip(row, names):
                if c == 0:
                    continue
                terms.append(v if c == 1 else f"{c}{v}")
            if k or not terms:
                terms.append(str(k))
            rendered.append("+".join(terms))
        return rendered[0] if self.out_dim == 1 else "(" + ", ".join(rendered) + ")"


def _var_names(n: int) -> list[str]:
    base = "xyztuvw"
    if n <= len(base):
        return list(base[:n])
    return [f"x{i+1}" for i in range(n)]


@dataclass(frozen=True)
class Interpretation:
    m: AffineMap
    e: AffineMap
    s: AffineMap

    def __post_init__(self):
        for kind in "mes":
            g = getattr(self, kind)
            if (g.in_dim, g.out_dim) != (GATE_IN[kind], GATE_OUT[kind]):
                raise DimensionMismatch(f"gate {kind} needs {GATE_IN[kind]}->{GATE_OUT[kind]}")
            ones = g((1,) * g.in_dim)
            if any(v < 1 for v in ones):
                raise ValueError(f"gate {kind} must map positive points to positive points")

    def gate(self, kind: str) -> AffineMap:
        return getattr(self, kind)


DEFAULT_INTERPRETATION = Interpretation(
    m=AffineMap(2, 1, ((2, 1),), (0,)),
    e=AffineMap(0, 1, ((),), (1,)),
    s=AffineMap(2, 2, ((1, 1), (1, 0)), (0, 0)),
)


def interpret_diagram(d: Diagram, interp: Interpretation = DEFAULT_INTERPRETATION) -> AffineMap:
    out = AffineMap.identity(d.inputs)
    widths = d.widths()
    for k, (left, kind) in enumerate(d.slices):
        w = widths[k]
        right = w - left - GATE_IN[kind]
        layer = AffineMap.identity(left).beside(interp.gate(kind)).beside(AffineMap.identity(right))
        out = out.then(layer)
    return out


def strictly_dominates(f: AffineMap, g: AffineMap) -> bool:
    """f > g as maps on positive integer points, per the product order: every
    coefficient of f-g is nonnegative and the difference is not identically
    zero.  Decided symbolically; some coordinates of f and g may coincide."""
    if (f.in_dim, f.out_dim) != (g.in_dim, g.out_dim):
        raise DimensionMismatch("cannot compare maps of different shapes")
    diff_nonneg = all(cf >= cg for rf, rg in zip(f.coeffs, g.coeffs)
                      for cf, cg in zip(rf, rg))
    diff_nonneg = diff_nonneg and all(kf >= kg for kf, kg in zip(f.consts, g.consts))
    if not diff_nonneg:
        return False
    ones_f = f((1,) * f.in_dim)
    ones_g = g((1,) * g.in_dim)
    return any(a > b for a, b in zip(ones_f, ones_g))


@dataclass(frozen=True)
class RuleVerdict:
    rule: Rule
    lhs_map: AffineMap
    rhs_map: AffineMap
    decreases: bool

    def line(self) -> str:
        sign = ">" if self.decreases else "!>"
        flag = "ok" if self.decreases else "FAIL"
        return (f"{self.rule.name:6s} {self.rule.lhs.to_expr()}  =>  {self.rule.rhs.to_expr()}"
                f"   [{self.lhs_map.polynomial()} {sign} {self.rhs_map.polynomial()}]  {flag}")


@dataclass(frozen=True)
class TerminationReport:
    ruleset: str
    verdicts: tuple[RuleVerdict, ...]

    @property
    def terminating(self) -> bool:
        return all(v.decreases for v in self.verdicts)

    def render(self) -> str:
        lines = [f"termination check for rule set {self.ruleset}"]
        lines += [v.line() for v in self.verdicts]
        n_ok = sum(v.decreases for v in self.verdicts)
        lines.append(f"{n_ok}/{len(self.verdicts)} rules decrease: "
                     + ("terminating" if self.terminating else "NOT PROVED"))
        return "\n".join(lines)


def verify_termination(rules: RuleSet,
                       interp: Interpretation = DEFAULT_INTERPRETATION) -> TerminationReport:
    verdicts = []
    for rule in rules:
        lm = interpret_diagram(rule.lhs, interp)
        rm = interpret_diagram(rule.rhs, interp)
        verdicts.append(RuleVerdict(rule, lm, rm, strictly_dominates(lm, rm)))
    return TerminationReport(rules.name, tuple(verdicts))


def parse_interpretation(text: str) -> Interpretation:
    """Text table, one gate per line: `m: 2x+y`, `s: (y, x+y)`, `e: 1`."""
    import re

    gates: dict[str, AffineMap] = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        name, _, body = line.partition(":")
        name = name.strip()
        if name not in GATE_IN:
            raise ValueError(f"unknown gate {name!r}")
        n_in = GATE_IN[name]
        names = _var_names(n_in)
        body = body.strip()
        rows = [r.strip() for r in body.strip("()").split(",")] if body.startswith("(") else [body]
        if len(rows) != GATE_OUT[name]:
            raise ValueError(f"gate {name} needs {GATE_OUT[name]} output rows")
        coeffs, consts = [], []
        for row in rows:
            cs = [0] * n_in
            k = 0
            for term in re.findall(r"[+-]?[^+-]+", row.replace(" ", "")):
                mobj = re.fullmatch(r"([+-]?)(\d*)([a-z]?\d*)", term)
                if mobj is None:
                    raise ValueError(f"bad term {term!r}")
                sign, digits, var = mobj.groups()
                val = int(digits) if digits else 1
                if sign == "-":
                    raise ValueError("coefficients must be natural numbers")
                if var:
                    if var not in names:
                        raise ValueError(f"unknown variable {var!r} for gate {name}")
                    cs[names.index(var)] += val
                else:
                    k += val
            coeffs.append(tuple(cs))
            consts.append(k)
        gates[name] = AffineMap(n_in, GATE_OUT[name], tuple(coeffs), tuple(consts))
    missing = set("mes") - set(gates)
    if missing:
        raise ValueError(f"missing gates: {sorted(missing)}")
    return Interpretation(m=gates["m"], e=gates["e"], s=gates["s"])
