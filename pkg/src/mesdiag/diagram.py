"""
Monochrome string diagrams over the three-gate signature m (2->1), e (0->1), s (2->2).

A diagram phi : p -> q is stored as a sequence of *slices*, one whiskered gate per
slice: slice k is a gate of kind `m`/`e`/`s` placed at wire offset `left`, with
identity wires filling the rest of the width.  Widths chain from p down to q.

Diagrams are values of the free PRO on the signature, i.e. slice sequences modulo
the interchange of wire-disjoint gates.  We pick one representative per class: the
*leftmost-earliest schedule* of the diagram's port graph (see `canonical_form`),
so structural equality of canonical slice tuples decides equality in the PRO.

Tokens and ports: while scheduling we track wires as tokens.  A token is either an
input-interface pin ('in', i) or a gate output port (gate_index, out_index).  The
port graph maps each token to its unique consumer, a gate input port or an
output-interface pin.
"""

from __future__ import annotations

import itertools
from typing import Callable, Iterable, Iterator

GATE_IN = {"m": 2, "e": 0, "s": 2}
GATE_OUT = {"m": 1, "e": 1, "s": 2}

# Desk-scale guardrail: reject diagrams wider or larger than this.
DEFAULT_CAP = 64

Token = tuple  # ('in', i) or (gate_index, out_index)


class DiagramError(Exception):
    pass


class MalformedDiagram(DiagramError):
    pass


class ArityMismatch(DiagramError):
    pass


class CapacityExceeded(DiagramError):
    pass


class ParseError(DiagramError):
    pass


class PortGraph:
    """Matching/scheduling view of a diagram: gates, wires and interface pins.

    `producers[g]` lists, for each input port of gate g, the token feeding it.
    `consumer[token]` is ('gate', g, i) or ('out', j).  `out_tokens[j]` is the
    token delivered to output pin j.
    """

    __slots__ = ("n_in", "n_out", "kinds", "producers", "consumer", "out_tokens")

    def __init__(self, n_in, n_out, kinds, producers, consumer, out_tokens):
        self.n_in = n_in
        self.n_out = n_out
        self.kinds = kinds  # tuple of gate kinds, in slice order of the source diagram
        self.producers = producers  # tuple of tuples of tokens
        self.consumer = consumer  # dict token -> ('gate', g, i) | ('out', j)
        self.out_tokens = out_tokens  # tuple of tokens

    def gate_count(self) -> int:
        return len(self.kinds)

    def predecessors(self, g: int) -> set[int]:
        return {t[0] for t in self.producers[g] if t[0] != "in"}

    def dependents(self, gates: Iterable[int]) -> set[int]:
        """All gates that transitively consume an output of `gates`."""
        base = set(gates)
        out = set()
        changed = True
        while changed:
            changed = False
            for g in range(len(self.kinds)):
                if g in out or g in base:
                    continue
                if any(t[0] != "in" and (t[0] in base or t[0] in out)
                       for t in self.producers[g]):
                    out.add(g)
                    changed = True
        return out


class Diagram:
    """An immutable morphism p -> q of the free PRO, held in canonical form.

    Use `Diagram.make` (or `parse`, or the composition helpers) to construct;
    the raw constructor trusts its arguments.
    """

    __slots__ = ("inputs", "outputs", "slices", "_hash", "_pg")

    def __init__(self, inputs: int, outputs: int, slices: tuple[tuple[int, str], ...]):
        self.inputs = inputs
        self.outputs = outputs
        self.slices = slices
        self._hash = hash((inputs, outputs, slices))
        self._pg = None

    # -- construction -----------------------------------------------------

    @staticmethod
    def make(inputs: int, slices: Iterable[tuple[int, str]], cap: int = DEFAULT_CAP) -> "Diagram":
        """Validate chaining, canonicalize, and intern the result."""
        slices = tuple(slices)
        outputs = _check_chain(inputs, slices, cap)
        canon, _ = _canonical_slices(inputs, slices)
        return Diagram(inputs, outputs, canon)

    def __eq__(self, other) -> bool:
        return (isinstance(other, Diagram)
                and self.inputs == other.inputs
                and self.outputs == other.outputs
                and self.slices == other.slices)

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        return f"Diagram({self.to_expr()!r})"

    def __str__(self) -> str:
        return self.to_expr()

    # -- basic data --------------------------------------------------------

    def gate_count(self) -> int:
        return len(self.slices)

    def gate_kinds(self) -> tuple[str, ...]:
        return tuple(k for _, k in self.slices)

    def widths(self) -> list[int]:
        """Wire counts between slices: widths()[k] is the width above slice k."""
        w = [self.inputs]
        for _, k in self.slices:
            w.append(w[-1] - GATE_IN[k] + GATE_OUT[k])
        return w

    def is_identity(self) -> bool:
        return not self.slices

    def port_graph(self) -> PortGraph:
        if self._pg is None:
            self._pg = _build_port_graph(self.inputs, self.slices)
        return self._pg

    # -- text form ----------------------------------------------------------

    def to_expr(self) -> str:
        """Canonical expression; `parse(to_expr())` round-trips."""
        if not self.slices:
            return f"id{self.inputs}"
        widths = self.widths()
        parts = []
        for k, (left, kind) in enumerate(self.slices):
            right = widths[k] - left - GATE_IN[kind]
            atoms = []
            if left:
                atoms.append(f"id{left}")
            atoms.append(kind)
            if right:
                atoms.append(f"id{right}")
            parts.append(" * ".join(atoms))
        return " ; ".join(parts)


def _check_chain(inputs: int, slices: tuple[tuple[int, str], ...], cap: int) -> int:
    if inputs < 0:
        raise MalformedDiagram("negative input arity")
    if len(slices) > cap:
        raise CapacityExceeded(f"more than {cap} gates")
    w = inputs
    for left, kind in slices:
        if kind not in GATE_IN:
            raise MalformedDiagram(f"unknown gate kind {kind!r}")
        if left < 0 or left + GATE_IN[kind] > w:
            raise MalformedDiagram(f"gate {kind} at offset {left} does not fit width {w}")
        w = w - GATE_IN[kind] + GATE_OUT[kind]
        if w > cap or inputs > cap:
            raise CapacityExceeded(f"width above {cap}")
    return w


def _build_port_graph(inputs: int, slices) -> PortGraph:
    frontier: list[Token] = [("in", i) for i in range(inputs)]
    producers = []
    consumer: dict[Token, tuple] = {}
    kinds = []
    for g, (left, kind) in enumerate(slices):
        a = GATE_IN[kind]
        consumed = frontier[left:left + a]
        for i, t in enumerate(consumed):
            consumer[t] = ("gate", g, i)
        producers.append(tuple(consumed))
        kinds.append(kind)
        frontier[left:left + a] = [(g, o) for o in range(GATE_OUT[kind])]
    for j, t in enumerate(frontier):
        consumer[t] = ("out", j)
    return PortGraph(inputs, len(frontier), tuple(kinds), tuple(producers),
                     consumer, tuple(frontier))


def _desc_keys(pg: PortGraph) -> dict[Token, tuple]:
    """Planar position key of every token: the path of input-port indices down
    to the output interface, starting from the interface pin reached.  Keys are
    totally ordered left-to-right and invariant under interchange."""
    keys: dict[Token, tuple] = {}

    def key(t: Token) -> tuple:
        got = keys.get(t)
        if got is not None:
            return got
        kind, *rest = pg.consumer[t]
        if kind == "out":
            k = (pg.consumer[t][1],)
        else:
            _, g, i = pg.consumer[t]
            k = key((g, 0)) + (i,)
        keys[t] = k
        return k

    for g in range(pg.gate_count()):
        for o in range(GATE_OUT[pg.kinds[g]]):
            key((g, o))
        for t in pg.producers[g]:
            key(t)
    for t in pg.out_tokens:
        key(t)
    return keys


def _schedule(pg: PortGraph) -> tuple[tuple[tuple[int, str], ...], tuple[int, ...]]:
    """Leftmost-earliest schedule of a port graph.

    Returns (slices, emission) where emission[k] is the gate index (in the
    source numbering) emitted at slice k.  Among the gates whose inputs are
    available and contiguous, the one with the leftmost planar key goes first;
    keys are distinct, so the schedule is deterministic.
    """
    keys = _desc_keys(pg)
    n = pg.gate_count()
    frontier: list[Token] = [("in", i) for i in range(pg.n_in)]
    fired: list[bool] = [False] * n
    out_slices: list[tuple[int, str]] = []
    emission: list[int] = []
    anchor = [keys[(g, 0)] for g in range(n)]
    order = sorted(range(n), key=lambda g: anchor[g])
    for _ in range(n):
        chosen = -1
        offset = -1
        for g in order:
            if fired[g]:
                continue
            kind = pg.kinds[g]
            a = GATE_IN[kind]
            if a == 0:
                k = keys[(g, 0)]
                offset = sum(1 for t in frontier if keys[t] < k)
                chosen = g
                break
            try:
                pos = frontier.index(pg.producers[g][0])
            except ValueError:
                continue
            if frontier[pos:pos + a] == list(pg.producers[g]):
                offset = pos
                chosen = g
                break
        if chosen < 0:
            raise MalformedDiagram("port graph is not schedulable")
        kind = pg.kinds[chosen]
        frontier[offset:offset + GATE_IN[kind]] = [(chosen, o) for o in range(GATE_OUT[kind])]
        out_slices.append((offset, kind))
        emission.append(chosen)
        fired[chosen] = True
    if frontier != list(pg.out_tokens):
        raise MalformedDiagram("schedule does not reproduce the interface")
    return tuple(out_slices), tuple(emission)


def _canonical_slices(inputs, slices):
    pg = _build_port_graph(inputs, slices)
    return _schedule(pg)


# -- public operations ------------------------------------------------------


def identity(n: int) -> Diagram:
    if n < 0:
        raise MalformedDiagram("negative arity")
    return Diagram(n, n, ())


def gate(kind: str) -> Diagram:
    return Diagram(GATE_IN[kind], GATE_OUT[kind], ((0, kind),))


def canonical_form(d: Diagram) -> Diagram:
    """Idempotent by construction: stored diagrams are already canonical."""
    return Diagram.make(d.inputs, d.slices)


def canonical_with_emission(inputs: int, slices) -> tuple[Diagram, tuple[int, ...]]:
    """Canonicalize a raw slice list, also reporting which raw gate landed at
    each canonical position (used to track gate identity through rewrites)."""
    slices = tuple(slices)
    outputs = _check_chain(inputs, slices, DEFAULT_CAP)
    canon, emission = _canonical_slices(inputs, slices)
    return Diagram(inputs, outputs, canon), emission


def seq_compose(f: Diagram, g: Diagram) -> Diagram:
    if f.outputs != g.inputs:
        raise ArityMismatch(f"cannot chain {f.outputs} outputs into {g.inputs} inputs")
    return Diagram.make(f.inputs, f.slices + g.slices)


def par_compose(f: Diagram, g: Diagram) -> Diagram:
    # f runs first with g's wires idle on the right, then g shifted past f's outputs.
    slices = list(f.slices)
    slices += [(left + f.outputs, kind) for left, kind in g.slices]
    return Diagram.make(f.inputs + g.inputs, slices)


def equals(f: Diagram, g: Diagram) -> bool:
    return f == g


def compose_all(parts: Iterable[Diagram]) -> Diagram:
    parts = list(parts)
    out = parts[0]
    for p in parts[1:]:
        out = seq_compose(out, p)
    return out


# -- text grammar -------------------------------------------------------------
#
#   d ::= "m" | "e" | "s" | "id" NAT | "(" d ")" | d ";" d | d "*" d
#
# "*" binds tighter than ";".  ";" runs its left operand first (top of the
# picture), "*" puts its left operand on the left.


def _tokenize(text: str) -> list[str]:
    out = []
    i = 0
    while i < len(text):
        c = text[i]
        if c.isspace():
            i += 1
        elif c in "();*":
            out.append(c)
            i += 1
        elif text.startswith("id", i):
            j = i + 2
            while j < len(text) and text[j].isdigit():
                j += 1
            if j == i + 2:
                raise ParseError(f"'id' needs a number at position {i}")
            out.append(text[i:j])
            i = j
        elif c in "mes":
            out.append(c)
            i += 1
        else:
            raise ParseError(f"unexpected character {c!r} at position {i}")
    return out


def parse(text: str) -> Diagram:
    toks = _tokenize(text)
    pos = 0

    def peek():
        return toks[pos] if pos < len(toks) else None

    def eat(t):
        nonlocal pos
        if peek() != t:
            raise ParseError(f"expected {t!r}, found {peek()!r}")
        pos += 1

    def atom() -> Diagram:
        nonlocal pos
        t = peek()
        if t is None:
            raise ParseError("unexpected end of input")
        if t == "(":
            eat("(")
            d = seq()
            eat(")")
            return d
        pos += 1
        if t in GATE_IN:
            return gate(t)
        if t.startswith("id"):
            return identity(int(t[2:]))
        raise ParseError(f"unexpected token {t!r}")

    def par() -> Diagram:
        d = atom()
        while peek() == "*":
            eat("*")
            d = par_compose(d, atom())
        return d

    def seq() -> Diagram:
        d = par()
        while peek() == ";":
            eat(";")
            d = seq_compose(d, par())
        return d

    d = seq()
    if pos != len(toks):
        raise ParseError(f"trailing input from token {pos}")
    return d


# -- enumeration --------------------------------------------------------------


def _extensions(d: Diagram) -> Iterator[Diagram]:
    """All canonical diagrams obtained by appending one gate below `d`."""
    w = d.outputs
    for kind in ("m", "e", "s"):
        a = GATE_IN[kind]
        for left in range(w - a + 1):
            yield Diagram.make(d.inputs, d.slices + ((left, kind),))


def enumerate_diagrams(p: int, q: int, max_gates: int) -> list[Diagram]:
    """All pairwise-distinct canonical diagrams p -> q with at most `max_gates`
    gates, in a deterministic order (gate count, then expression text).

    Grows layer by layer: every diagram with k+1 gates arises from some diagram
    with k gates by appending its last-scheduled gate, so appending one gate in
    every position and deduplicating by canonical form is exhaustive.
    """
    layer: set[Diagram] = {identity(p)}
    seen_all: set[Diagram] = set(layer)
    for _ in range(max_gates):
        nxt: set[Diagram] = set()
        for d in layer:
            for ext in _extensions(d):
                if ext not in seen_all:
                    nxt.add(ext)
        seen_all |= nxt
        layer = nxt
        if not layer:
            break
    out = [d for d in seen_all if d.outputs == q]
    out.sort(key=lambda d: (d.gate_count(), d.to_expr()))
    return out


def all_diagrams_from(p: int, max_gates: int) -> list[Diagram]:
    """All canonical diagrams with p inputs and at most `max_gates` gates."""
    layer: set[Diagram] = {identity(p)}
    seen_all: set[Diagram] = set(layer)
    for _ in range(max_gates):
        nxt: set[Diagram] = set()
        for d in layer:
            for ext in _extensions(d):
                if ext not in seen_all:
                    nxt.add(ext)
        seen_all |= nxt
        layer = nxt
    out = sorted(seen_all, key=lambda d: (d.gate_count(), d.to_expr()))
    return out
