"""
Term-level front end: objects and morphisms of the free symmetric monoidal
category on variables, and their translation to diagrams and zigzags.

A diagram n -> 1 is read by labeling the input strings with variables (fixed
by an input order), the output of an e gate with the unit, the output of an m
gate with the product of its input labels, and treating s as a labeled
crossing.  `term_to_diagram` inverts that reading: it returns the unique
structural-normal diagram (the primary cell) whose reading is the given linear
term.

Morphism generators map to rule steps between primary cells.  The associator
and the unitors fire along their generator; the braiding and the parallel
associator fire against it, so those edges may need a non-primary witness
diagram reached by structural steps.

Grammars:  t ::= IDENT | "I" | "(" t "#" t ")"
           f ::= "a("t","t","t")" | "l("t")" | "r("t")" | "x("t","t")"
               | "g("t","t","t")" | "1("t")" | f "." f | f "#" f | f "~"
with "." composing left first, "#" the tensor and "~" the formal inverse.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .diagram import Diagram, DiagramError, gate, identity, par_compose, seq_compose
from .rewrite import (
    RewriteStep,
    find_redexes,
    make_step,
    structural_normal_form,
)
from .rules import RuleSet
from .zigzag import Move, ZigzagPath


class TermError(DiagramError):
    pass


class NonLinearTerm(TermError):
    pass


class UnknownVariable(TermError):
    pass


class CompositionMismatch(TermError):
    pass


# -- terms -----------------------------------------------------------------------


@dataclass(frozen=True)
class Term:
    """A tree over variables, the unit, and the binary product."""

    op: str  # "var" | "unit" | "prod"
    name: str | None = None
    left: "Term | None" = None
    right: "Term | None" = None

    def __str__(self) -> str:
        if self.op == "var":
            return self.name
        if self.op == "unit":
            return "I"
        return f"({self.left}#{self.right})"

    def variables(self) -> list[str]:
        if self.op == "var":
            return [self.name]
        if self.op == "unit":
            return []
        return self.left.variables() + self.right.variables()

    def leaves(self) -> list["Term"]:
        if self.op == "prod":
            return self.left.leaves() + self.right.leaves()
        return [self]


def var(name: str) -> Term:
    return Term("var", name=name)


UNIT = Term("unit")


def prod(a: Term, b: Term) -> Term:
    return Term("prod", left=a, right=b)


def parse_term(text: str) -> Term:
    toks = re.findall(r"[A-Za-z_]\w*|[()#]", text)
    if "".join(toks).replace(" ", "") != text.replace(" ", ""):
        raise TermError(f"cannot tokenize term {text!r}")
    pos = 0

    def take() -> Term:
        nonlocal pos
        if pos >= len(toks):
            raise TermError("unexpected end of term")
        t = toks[pos]
        pos += 1
        if t == "(":
            a = take()
            if pos >= len(toks) or toks[pos] != "#":
                raise TermError("expected '#'")
            pos += 1
            b = take()
            if pos >= len(toks) or toks[pos] != ")":
                raise TermError("expected ')'")
            pos += 1
            return prod(a, b)
        if t == "I":
            return UNIT
        if re.fullmatch(r"[A-Za-z_]\w*", t):
            return var(t)
        raise TermError(f"unexpected token {t!r}")

    out = take()
    if pos != len(toks):
        raise TermError("trailing input after term")
    return out


def check_linear(t: Term, order: list[str]) -> None:
    vs = t.variables()
    if len(vs) != len(set(vs)):
        dupes = sorted({v for v in vs if vs.count(v) > 1})
        raise NonLinearTerm(f"variables repeat: {', '.join(dupes)}")
    extra = [v for v in vs if v not in order]
    if extra:
        raise UnknownVariable(f"not in the input order: {', '.join(extra)}")
    missing = [v for v in order if v not in vs]
    if missing:
        raise UnknownVariable(
            f"order variables unused by the term: {', '.join(missing)}")


# -- reading and building diagrams -------------------------------------------------


def _tree_diagram(t: Term) -> Diagram:
    """The literal diagram of a term: e for units, m for products, inputs in
    the term's own frontier order."""
    if t.op == "var":
        return identity(1)
    if t.op == "unit":
        return gate("e")
    return seq_compose(par_compose(_tree_diagram(t.left), _tree_diagram(t.right)),
                       gate("m"))


def _route(src: list[str], dst: list[str]) -> Diagram:
    """A permutation diagram (adjacent s crossings) taking wires labeled `src`
    to order `dst`."""
    cur = list(src)
    d = identity(len(src))
    for i, want in enumerate(dst):
        j = cur.index(want)
        while j > i:
            layer = par_compose(par_compose(identity(j - 1), gate("s")),
                                identity(len(cur) - j - 1))
            d = seq_compose(d, layer)
            cur[j - 1], cur[j] = cur[j], cur[j - 1]
            j -= 1
    return d


def term_to_diagram(t: Term, order: list[str]) -> Diagram:
    """The primary cell of a linear term: the structural normal form among all
    diagrams reading to `t` with inputs labeled by `order`."""
    check_linear(t, order)
    raw = seq_compose(_route(list(order), t.variables()), _tree_diagram(t))
    nf, _ = structural_normal_form(raw)
    return nf


def read_diagram(d: Diagram, order: list[str]) -> Term:
    """Read a diagram n -> 1 back into a term under the labeling convention."""
    if d.inputs != len(order):
        raise TermError(f"diagram has {d.inputs} inputs, order has {len(order)}")
    if d.outputs != 1:
        raise TermError("only single-output diagrams read as terms")
    labels: list[Term] = [var(n) for n in order]
    for left, kind in d.slices:
        if kind == "e":
            labels[left:left] = [UNIT]
        elif kind == "m":
            labels[left:left + 2] = [prod(labels[left], labels[left + 1])]
        else:  # s crosses its labels
            labels[left], labels[left + 1] = labels[left + 1], labels[left]
    return labels[0]


def read_tuple(d: Diagram, order: list[str]) -> tuple[Term, ...]:
    """Multi-output reading: the tuple of output labels."""
    if d.inputs != len(order):
        raise TermError(f"diagram has {d.inputs} inputs, order has {len(order)}")
    labels: list[Term] = [var(n) for n in order]
    for left, kind in d.slices:
        if kind == "e":
            labels[left:left] = [UNIT]
        elif kind == "m":
            labels[left:left + 2] = [prod(labels[left], labels[left + 1])]
        else:
            labels[left], labels[left + 1] = labels[left + 1], labels[left]
    return tuple(labels)


# -- morphism generators and expressions -------------------------------------------


GEN_KINDS = {"alpha": 3, "lambda": 1, "rho": 1, "tau": 2, "gamma": 3, "identity": 1}

KIND_RULE = {"alpha": "alpha", "lambda": "l", "rho": "r", "tau": "tau",
             "gamma": "gamma"}


@dataclass(frozen=True)
class MorGen:
    kind: str
    at: tuple[Term, ...]
    inverted: bool = False

    def __post_init__(self):
        if self.kind not in GEN_KINDS:
            raise TermError(f"unknown generator {self.kind!r}")
        if len(self.at) != GEN_KINDS[self.kind]:
            raise TermError(f"{self.kind} takes {GEN_KINDS[self.kind]} terms")

    def source(self) -> Term:
        s, t = _gen_terms(self.kind, self.at)
        return t if self.inverted else s

    def target(self) -> Term:
        s, t = _gen_terms(self.kind, self.at)
        return s if self.inverted else t

    def inverse(self) -> "MorGen":
        return MorGen(self.kind, self.at, not self.inverted)

    def __str__(self) -> str:
        short = {"alpha": "a", "lambda": "l", "rho": "r", "tau": "x",
                 "gamma": "g", "identity": "1"}[self.kind]
        body = f"{short}({','.join(map(str, self.at))})"
        return body + ("~" if self.inverted else "")


def _gen_terms(kind: str, at: tuple[Term, ...]) -> tuple[Term, Term]:
    if kind == "alpha":
        a, b, c = at
        return prod(prod(a, b), c), prod(a, prod(b, c))
    if kind == "lambda":
        (a,) = at
        return prod(UNIT, a), a
    if kind == "rho":
        (a,) = at
        return prod(a, UNIT), a
    if kind == "tau":
        a, b = at
        return prod(a, b), prod(b, a)
    if kind == "gamma":
        a, b, c = at
        return prod(a, prod(b, c)), prod(b, prod(a, c))
    (a,) = at
    return a, a


@dataclass(frozen=True)
class MorExpr:
    """gen | comp (left runs first) | tensor | inv."""

    op: str
    gen: MorGen | None = None
    left: "MorExpr | None" = None
    right: "MorExpr | None" = None

    def source(self) -> Term:
        if self.op == "gen":
            return self.gen.source()
        if self.op == "comp":
            return self.left.source()
        if self.op == "tensor":
            return prod(self.left.source(), self.right.source())
        return self.left.target()

    def target(self) -> Term:
        if self.op == "gen":
            return self.gen.target()
        if self.op == "comp":
            return self.right.target()
        if self.op == "tensor":
            return prod(self.left.target(), self.right.target())
        return self.left.source()

    def check(self) -> None:
        if self.op == "comp":
            self.left.check()
            self.right.check()
            if self.left.target() != self.right.source():
                raise CompositionMismatch(
                    f"cannot compose: {self.left.target()} vs {self.right.source()}")
        elif self.op in ("tensor", "inv"):
            self.left.check()
            if self.right is not None:
                self.right.check()


def mgen(g: MorGen) -> MorExpr:
    return MorExpr("gen", gen=g)


def parse_mor(text: str) -> MorExpr:
    toks = re.findall(r"[A-Za-z_]\w*|\d+|[()#.,~]", text)
    if "".join(toks).replace(" ", "") != text.replace(" ", ""):
        raise TermError(f"cannot tokenize morphism {text!r}")
    pos = 0
    heads = {"a": "alpha", "l": "lambda", "r": "rho", "x": "tau", "g": "gamma",
             "1": "identity"}

    def peek():
        return toks[pos] if pos < len(toks) else None

    def term_arg() -> Term:
        nonlocal pos
        depth = 0
        out = []
        while pos < len(toks):
            t = toks[pos]
            if t == "(":
                depth += 1
            elif t == ")":
                if depth == 0:
                    break
                depth -= 1
            elif t == "," and depth == 0:
                break
            out.append(t)
            pos += 1
        return parse_term("".join(out))

    def atom() -> MorExpr:
        nonlocal pos
        t = peek()
        if t == "(":
            pos += 1
            f = expr()
            if peek() != ")":
                raise TermError("expected ')'")
            pos += 1
            return postfix(f)
        if t in heads and pos + 1 < len(toks) and toks[pos + 1] == "(":
            kind = heads[t]
            pos += 2
            args = [term_arg()]
            while peek() == ",":
                pos += 1
                args.append(term_arg())
            if peek() != ")":
                raise TermError("expected ')' after generator arguments")
            pos += 1
            return postfix(mgen(MorGen(kind, tuple(args))))
        raise TermError(f"unexpected token {t!r} in morphism")

    def postfix(f: MorExpr) -> MorExpr:
        nonlocal pos
        while peek() == "~":
            pos += 1
            f = MorExpr("inv", left=f)
        return f

    def tensor() -> MorExpr:
        nonlocal pos
        f = atom()
        while peek() == "#":
            pos += 1
            f = MorExpr("tensor", left=f, right=atom())
        return f

    def expr() -> MorExpr:
        nonlocal pos
        f = tensor()
        while peek() == ".":
            pos += 1
            f = MorExpr("comp", left=f, right=tensor())
        return f

    out = expr()
    if pos != len(toks):
        raise TermError("trailing input after morphism")
    out.check()
    return out


# -- atomization: generator applied at a subterm position ---------------------------


HOLE = Term("var", name="□")  # placeholder leaf, never a user variable


def plug(ctx: Term, filler: Term) -> Term:
    if ctx == HOLE:
        return filler
    if ctx.op == "prod":
        return prod(plug(ctx.left, filler), plug(ctx.right, filler))
    return ctx


def atomize(f: MorExpr) -> list[tuple[MorGen, Term]]:
    """Flatten to a list of (generator, context-with-hole), source to target.
    Tensors expand as f#g = (f#1);(1#g)."""
    f.check()
    if f.op == "gen":
        if f.gen.kind == "identity":
            return []
        return [(f.gen, HOLE)]
    if f.op == "comp":
        return atomize(f.left) + atomize(f.right)
    if f.op == "inv":
        return [(g.inverse(), ctx) for g, ctx in reversed(atomize(f.left))]
    # tensor
    lsrc, ltgt = f.left.source(), f.left.target()
    rsrc, rtgt = f.right.source(), f.right.target()
    out = [(g, prod(ctx, rsrc)) for g, ctx in atomize(f.left)]
    out += [(g, prod(ltgt, ctx)) for g, ctx in atomize(f.right)]
    return out


# -- edges: one generator application as a zigzag segment ---------------------------


def _tree_with_hole(ctx: Term, hole_diag: Diagram, hole_vars: list[str]) -> tuple[Diagram, list[str]]:
    """Literal diagram of a context term with the hole filled by `hole_diag`,
    plus the resulting frontier variable order."""
    if ctx == HOLE:
        return hole_diag, list(hole_vars)
    if ctx.op == "var":
        return identity(1), [ctx.name]
    if ctx.op == "unit":
        return gate("e"), []
    dl, vl = _tree_with_hole(ctx.left, hole_diag, hole_vars)
    dr, vr = _tree_with_hole(ctx.right, hole_diag, hole_vars)
    return seq_compose(par_compose(dl, dr), gate("m")), vl + vr


def _pattern_hole(kind: str, at: tuple[Term, ...], reading: str) -> tuple[Diagram, list[str]]:
    """A diagram containing the literal rule pattern of `kind`, reading the
    generator's source (reading="src") or target (reading="tgt") subterm."""
    trees = [_tree_with_hole(t, identity(0), []) for t in at]
    if kind == "alpha":
        (da, va), (db, vb), (dc, vc) = trees
        if reading == "src":  # ((a#b)#c): the (m*1);m pattern
            d = seq_compose(par_compose(seq_compose(par_compose(da, db), gate("m")), dc),
                            gate("m"))
            return d, va + vb + vc
        d = seq_compose(par_compose(da, seq_compose(par_compose(db, dc), gate("m"))),
                        gate("m"))
        return d, va + vb + vc
    if kind in ("lambda", "rho"):
        (da, va) = trees[0]
        if kind == "lambda":
            d = seq_compose(par_compose(gate("e"), da), gate("m"))
        else:
            d = seq_compose(par_compose(da, gate("e")), gate("m"))
        return d, va
    if kind == "tau":
        (da, va), (db, vb) = trees
        if reading == "src":  # s inputs labeled (b, a): s;m reads a#b
            d = seq_compose(seq_compose(par_compose(db, da), gate("s")), gate("m"))
            return d, vb + va
        d = seq_compose(seq_compose(par_compose(da, db), gate("s")), gate("m"))
        return d, va + vb
    if kind == "gamma":
        (da, va), (db, vb), (dc, vc) = trees
        pattern = parse("(s * id1) ; (id1 * m) ; m")
        if reading == "src":  # wires (b, a, c): reads a#(b#c)
            base = par_compose(par_compose(db, da), dc)
            return seq_compose(base, pattern), vb + va + vc
        base = par_compose(par_compose(da, db), dc)
        return seq_compose(base, pattern), va + vb + vc
    raise TermError(f"no pattern hole for {kind}")


def _witness(gen: MorGen, ctx: Term, order: list[str], reading: str) -> Diagram:
    kind, at = gen.kind, gen.at
    if gen.inverted:
        # an inverted generator swaps which side each reading belongs to
        reading = "src" if reading == "tgt" else "tgt"
    hole, hole_vars = _pattern_hole(kind, at, reading)
    tree, vs = _tree_with_hole(ctx, hole, hole_vars)
    return seq_compose(_route(list(order), vs), tree)


def morgen_to_edge(gen: MorGen, ctx: Term, order: list[str],
                   rules: RuleSet) -> list[Move]:
    """The zigzag segment of one generator applied at a context position:
    structural moves, one rule step of the generator's kind (forward or
    backward), then structural moves."""
    src = plug(ctx, gen.source())
    tgt = plug(ctx, gen.target())
    phi_s = term_to_diagram(src, order)
    phi_t = term_to_diagram(tgt, order)
    if gen.kind == "identity":
        if phi_s != phi_t:
            raise TermError("identity generator with distinct endpoint diagrams")
        return []
    rule = rules[KIND_RULE[gen.kind]]
    one = RuleSet("one", (rule,))

    fwd_candidates = [phi_s]
    bwd_candidates = [phi_t]
    kind = gen.kind if not gen.inverted else gen.kind
    try:
        fwd_candidates.append(_witness(gen, ctx, order, "src"))
    except TermError:
        pass
    try:
        bwd_candidates.append(_witness(gen, ctx, order, "tgt"))
    except TermError:
        pass

    for psi in fwd_candidates:
        nf, pre = structural_normal_form(psi)
        if nf != phi_s:
            continue
        for redex in find_redexes(psi, one):
            st = make_step(redex)
            nf2, post = structural_normal_form(st.target)
            if nf2 != phi_t:
                continue
            return ([Move(s, False) for s in reversed(pre.steps)]
                    + [Move(st, True)]
                    + [Move(s, True) for s in post.steps])
    for psi in bwd_candidates:
        nf, post = structural_normal_form(psi)
        if nf != phi_t:
            continue
        for redex in find_redexes(psi, one):
            st = make_step(redex)
            nf2, pre = structural_normal_form(st.target)
            if nf2 != phi_s:
                continue
            return ([Move(s, False) for s in reversed(pre.steps)]
                    + [Move(st, False)]
                    + [Move(s, True) for s in post.steps])
    raise TermError(f"no {gen.kind} step connects {src} to {tgt}")


def mor_to_zigzag(f: MorExpr, order: list[str], rules: RuleSet) -> ZigzagPath:
    """Concatenate the edges of the atomized morphism expression."""
    f.check()
    start = term_to_diagram(f.source(), order)
    moves: list[Move] = []
    for g, ctx in atomize(f):
        moves.extend(morgen_to_edge(g, ctx, order, rules))
    return ZigzagPath(start, tuple(moves))
