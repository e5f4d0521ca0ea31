"""
Redex matching under arbitrary context, step application, and normalization.

An occurrence of a pattern diagram inside a host is a factorization

    host  =  chi_up ; (id_a * pattern * id_b) ; chi_down

witnessed by a gate correspondence and an explicit reschedule of the host into
an up phase, the pattern block, and a down phase.  Matching anchors on a host
gate of the pattern's first kind, propagates along wires (patterns are
connected), then validates the factorization by actually building it:

  * up phase: greedily fire every host gate that neither belongs to the block
    nor consumes (transitively) one of its outputs, as long as it is
    applicable; gates that are planar-blocked stay for the down phase;
  * the pattern's external input tokens must then sit consecutively, in order,
    in the frontier -- that position is the whisker offset a;
  * the block fires slice by slice at the pattern's own offsets, and the rest
    of the host follows.

All gates have at least one output in this signature, so tokens strictly
between two pattern inputs can never vanish; greedy exhaustion in the up phase
is therefore complete, not just sound.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .diagram import (
    GATE_IN,
    GATE_OUT,
    Diagram,
    DiagramError,
    _desc_keys,
    canonical_with_emission,
)
from .rules import Rule, RuleSet, STRUCTURAL_RULES


class StaleRedex(DiagramError):
    pass


class BudgetExhausted(DiagramError):
    pass


@dataclass(frozen=True)
class Occurrence:
    """A validated context factorization of `pattern` inside `host`."""

    host: Diagram
    pattern: Diagram
    mapping: tuple[int, ...]  # pattern gate k sits at host gate mapping[k]
    offset: int  # whisker offset a
    up: tuple[tuple[int, int, str], ...]  # (host gate, offset, kind) fired above
    down: tuple[tuple[int, int, str], ...]  # fired below

    @property
    def gates(self) -> tuple[int, ...]:
        return tuple(sorted(self.mapping))


def _fire(frontier: list, gate_tokens: tuple, offset: int, g: int, kind: str) -> None:
    frontier[offset:offset + GATE_IN[kind]] = [(g, o) for o in range(GATE_OUT[kind])]


def _greedy_phase(host: Diagram, keys, frontier: list, candidates: set[int],
                  fired: list[bool]) -> list[tuple[int, int, str]]:
    """Fire applicable gates from `candidates` leftmost-first until stuck."""
    pg = host.port_graph()
    emitted = []
    order = sorted(candidates, key=lambda g: keys[(g, 0)])
    progress = True
    while progress:
        progress = False
        for g in order:
            if fired[g]:
                continue
            kind = pg.kinds[g]
            a = GATE_IN[kind]
            if a == 0:
                k = keys[(g, 0)]
                offset = sum(1 for t in frontier if keys[t] < k)
            else:
                try:
                    offset = frontier.index(pg.producers[g][0])
                except ValueError:
                    continue
                if frontier[offset:offset + a] != list(pg.producers[g]):
                    continue
            _fire(frontier, pg.producers[g], offset, g, kind)
            emitted.append((g, offset, kind))
            fired[g] = True
            progress = True
    return emitted


def _block_inputs(host: Diagram, pattern: Diagram, mapping: dict[int, int]) -> list:
    """Host tokens feeding each pattern input pin, in pin order."""
    hpg, ppg = host.port_graph(), pattern.port_graph()
    toks = []
    for j in range(pattern.inputs):
        cons = ppg.consumer[("in", j)]
        if cons[0] != "gate":
            raise DiagramError("pattern has a pass-through wire")
        toks.append(hpg.producers[mapping[cons[1]]][cons[2]])
    return toks


def match_block(host: Diagram, pattern: Diagram, mapping: dict[int, int]) -> Occurrence | None:
    """Validate that the mapped gate set hosts `pattern` under some context."""
    hpg = host.port_graph()
    block = set(mapping.values())
    below = hpg.dependents(block)
    for g in block:
        for t in hpg.producers[g]:
            if t[0] != "in" and t[0] in below:
                return None  # not convex
    keys = _desc_keys(hpg)
    frontier = [("in", i) for i in range(host.inputs)]
    fired = [False] * host.gate_count()
    above = {g for g in range(host.gate_count()) if g not in block and g not in below}
    up = _greedy_phase(host, keys, frontier, above, fired)

    toks = _block_inputs(host, pattern, mapping)
    if toks:
        try:
            a = frontier.index(toks[0])
        except ValueError:
            return None
        if frontier[a:a + len(toks)] != toks:
            return None
    else:
        ppg = pattern.port_graph()
        first_out = ppg.out_tokens[0]
        host_tok = (mapping[first_out[0]], first_out[1])
        a = sum(1 for t in frontier if keys[t] < keys[host_tok])

    for pg_idx, (pleft, pkind) in enumerate(pattern.slices):
        g = mapping[pg_idx]
        if fired[g] or hpg.kinds[g] != pkind:
            return None
        offset = a + pleft
        need = list(hpg.producers[g])
        if frontier[offset:offset + GATE_IN[pkind]] != need:
            return None
        _fire(frontier, hpg.producers[g], offset, g, pkind)
        fired[g] = True

    rest = {g for g in range(host.gate_count()) if not fired[g]}
    down = _greedy_phase(host, keys, frontier, rest, fired)
    if not all(fired) or frontier != list(hpg.out_tokens):
        return None
    return Occurrence(host, pattern, tuple(mapping[i] for i in range(pattern.gate_count())),
                      a, tuple(up), tuple(down))


def _propagate(host: Diagram, pattern: Diagram, anchor: int) -> dict[int, int] | None:
    """Grow the forced gate correspondence from pattern gate 0 -> host `anchor`."""
    hpg, ppg = host.port_graph(), pattern.port_graph()
    if hpg.kinds[anchor] != ppg.kinds[0]:
        return None
    mapping = {0: anchor}
    queue = [0]
    while queue:
        p = queue.pop()
        h = mapping[p]
        for i, src in enumerate(ppg.producers[p]):
            if src[0] == "in":
                continue
            hsrc = hpg.producers[h][i]
            if hsrc[0] == "in" or hsrc[1] != src[1]:
                return None
            pg2, hg2 = src[0], hsrc[0]
            if ppg.kinds[pg2] != hpg.kinds[hg2]:
                return None
            if mapping.get(pg2, hg2) != hg2:
                return None
            if pg2 not in mapping:
                mapping[pg2] = hg2
                queue.append(pg2)
        for o in range(GATE_OUT[ppg.kinds[p]]):
            dst = ppg.consumer[(p, o)]
            if dst[0] != "gate":
                continue
            hdst = hpg.consumer[(h, o)]
            if hdst[0] != "gate" or hdst[2] != dst[2]:
                return None
            pg2, hg2 = dst[1], hdst[1]
            if ppg.kinds[pg2] != hpg.kinds[hg2]:
                return None
            if mapping.get(pg2, hg2) != hg2:
                return None
            if pg2 not in mapping:
                mapping[pg2] = hg2
                queue.append(pg2)
    if len(mapping) != pattern.gate_count():
        return None  # pattern not connected through wires from gate 0
    if len(set(mapping.values())) != len(mapping):
        return None
    return mapping


def has_pass_wire(pattern: Diagram) -> bool:
    ppg = pattern.port_graph()
    return any(ppg.consumer[("in", j)][0] == "out" for j in range(pattern.inputs))


def find_occurrences(host: Diagram, pattern: Diagram) -> list[Occurrence]:
    if has_pass_wire(pattern):
        return []  # position would be ambiguous; callers handle these specially
    out = []
    seen = set()
    for anchor in range(host.gate_count()):
        mapping = _propagate(host, pattern, anchor)
        if mapping is None:
            continue
        key = tuple(sorted(mapping.items()))
        if key in seen:
            continue
        seen.add(key)
        occ = match_block(host, pattern, mapping)
        if occ is not None:
            out.append(occ)
    out.sort(key=lambda o: o.mapping)
    return out


@dataclass(frozen=True)
class Redex:
    rule: Rule
    occurrence: Occurrence

    @property
    def gates(self) -> tuple[int, ...]:
        return self.occurrence.gates

    @property
    def host(self) -> Diagram:
        return self.occurrence.host

    def key(self) -> tuple:
        return (self.rule.name, self.gates)

    def __str__(self) -> str:
        return f"{self.rule.name}@{','.join(map(str, self.gates))}"


def find_redexes(host: Diagram, rules: RuleSet) -> list[Redex]:
    out = []
    for idx, rule in enumerate(rules):
        for occ in find_occurrences(host, rule.lhs):
            out.append((idx, Redex(rule, occ)))
    out.sort(key=lambda p: (p[0], p[1].gates))
    return [r for _, r in out]


def find_redex(host: Diagram, rules: RuleSet, rule_name: str,
               gates: tuple[int, ...]) -> Redex:
    """Locate the redex of `rule_name` covering exactly `gates`, or StaleRedex."""
    for r in find_redexes(host, rules):
        if r.rule.name == rule_name and r.gates == tuple(sorted(gates)):
            return r
    raise StaleRedex(f"{rule_name}@{gates} is not a valid occurrence in {host.to_expr()}")


@dataclass(frozen=True, eq=False)
class RewriteStep:
    """One rule application; `gate_map` tracks surviving context gates from
    source to target numbering and `new_gates` lists the created gates."""

    source: Diagram
    target: Diagram
    rule: Rule
    gates: tuple[int, ...]  # redex gates in the source's canonical numbering
    gate_map: dict[int, int] = field(repr=False)
    new_gates: tuple[int, ...] = field(repr=False)

    def key(self) -> tuple:
        return (self.source, self.rule.name, self.gates)

    def __eq__(self, other) -> bool:
        return isinstance(other, RewriteStep) and self.key() == other.key()

    def __hash__(self) -> int:
        return hash(self.key())

    def __str__(self) -> str:
        return f"{self.rule.name}@{','.join(map(str, self.gates))}"


def apply_occurrence(occ: Occurrence, replacement: Diagram) -> tuple[Diagram, dict[int, int], tuple[int, ...]]:
    """Replace the matched block by `replacement` (same arities as the pattern)."""
    if (replacement.inputs != occ.pattern.inputs
            or replacement.outputs != occ.pattern.outputs):
        raise DiagramError("replacement arity differs from the pattern")
    slices = []
    labels = []
    for g, offset, kind in occ.up:
        slices.append((offset, kind))
        labels.append(("old", g))
    for i, (pleft, pkind) in enumerate(replacement.slices):
        slices.append((occ.offset + pleft, pkind))
        labels.append(("new", i))
    for g, offset, kind in occ.down:
        slices.append((offset, kind))
        labels.append(("old", g))
    target, emission = canonical_with_emission(occ.host.inputs, slices)
    gate_map: dict[int, int] = {}
    new_gates: dict[int, int] = {}
    for new_idx, raw_idx in enumerate(emission):
        tag, v = labels[raw_idx]
        if tag == "old":
            gate_map[v] = new_idx
        else:
            new_gates[v] = new_idx
    return target, gate_map, tuple(new_gates[i] for i in range(replacement.gate_count()))


def make_step(redex: Redex) -> RewriteStep:
    target, gate_map, new_gates = apply_occurrence(redex.occurrence, redex.rule.rhs)
    return RewriteStep(redex.host, target, redex.rule, redex.gates, gate_map, new_gates)


def apply_redex(host: Diagram, redex: Redex) -> Diagram:
    if redex.host != host:
        redex = find_redex(host, RuleSet("tmp", (redex.rule,)), redex.rule.name, redex.gates)
    return make_step(redex).target


def step_at(host: Diagram, rules: RuleSet, rule_name: str, gates) -> RewriteStep:
    return make_step(find_redex(host, rules, rule_name, tuple(gates)))


@dataclass(frozen=True)
class RewritePath:
    steps: tuple[RewriteStep, ...]

    def __post_init__(self):
        for a, b in zip(self.steps, self.steps[1:]):
            if a.target != b.source:
                raise DiagramError("path steps do not chain")

    def source(self) -> Diagram:
        return self.steps[0].source if self.steps else None

    def target(self) -> Diagram:
        return self.steps[-1].target if self.steps else None

    def __len__(self):
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)

    def __str__(self) -> str:
        return " . ".join(str(s) for s in self.steps) if self.steps else "(empty)"


def normalize(d: Diagram, rules: RuleSet, strategy: str = "leftmost",
              seed: int | None = None, budget: int | None = None) -> tuple[Diagram, RewritePath]:
    """Rewrite to a normal form.  M and F terminate, so no budget is needed for
    them; other rule sets get a default budget of 10,000 steps."""
    if budget is None and rules.name not in ("M", "F", "structural"):
        budget = 10_000
    rng = random.Random(seed) if strategy == "random" else None
    steps = []
    current = d
    while True:
        redexes = find_redexes(current, rules)
        if not redexes:
            return current, RewritePath(tuple(steps))
        if budget is not None and len(steps) >= budget:
            raise BudgetExhausted(f"no normal form within {budget} steps")
        choice = rng.choice(redexes) if rng else redexes[0]
        step = make_step(choice)
        steps.append(step)
        current = step.target


def structural_normal_form(d: Diagram) -> tuple[Diagram, RewritePath]:
    return normalize(d, STRUCTURAL_RULES)


def normal_form(d: Diagram, rules: RuleSet) -> Diagram:
    return normalize(d, rules)[0]


def leftmost_step(d: Diagram, rules: RuleSet) -> RewriteStep | None:
    redexes = find_redexes(d, rules)
    return make_step(redexes[0]) if redexes else None


def canonical_path(d: Diagram, rules: RuleSet) -> list[RewriteStep]:
    """The leftmost normalization path from d to its normal form."""
    steps = []
    current = d
    while True:
        s = leftmost_step(current, rules)
        if s is None:
            return steps
        steps.append(s)
        current = s.target


def transport_step(through: RewriteStep, rules: RuleSet, rule_name: str,
                   gates: tuple[int, ...]) -> RewriteStep:
    """Carry a redex disjoint from `through` across it."""
    mapped = tuple(sorted(through.gate_map[g] for g in gates))
    return step_at(through.target, rules, rule_name, mapped)


def reverse_steps(host: Diagram, rules: RuleSet) -> list[RewriteStep]:
    """All steps X -> host obtained by unapplying a rule at an rhs occurrence.
    Rules whose right side is an identity are skipped (any wire would match)."""
    out = []
    for rule in rules:
        if rule.rhs.gate_count() == 0:
            continue
        for occ in find_occurrences(host, rule.rhs):
            source, _, new_gates = apply_occurrence(occ, rule.lhs)
            step = step_at(source, rules, rule.name, new_gates)
            if step.target == host:
                out.append(step)
    return out
