"""
Critical peak enumeration, joinability and classification.

A critical peak is a minimal diagram carrying two distinct overlapping redexes.
Enumeration has two sources:

  * plain superpositions: glue two rule left sides along a shared gate,
    propagate the identifications forced by the wiring, then search planar
    realizations of the glued port graph.  Amalgams are tiny (at most seven
    gates, four interface inputs), so trying input orders is cheap; the firing
    order of non-e gates never changes the canonical result, only the planar
    slots of e gates need branching.

  * six indexed conflict families whose two redexes are bridged by an inner
    subdiagram belonging to neither redex.  Generic superposition cannot
    produce these (the union of the redexes is not convex), so they are
    instantiated from templates, with the inner slot filled by the reduced
    representatives id1, s and m.

Joins normalize both branches with the leftmost strategy.  Classification
looks at the rules appearing on the two sides of the resulting square, peak
step included: all structural on both sides is strongly foldable, exactly one
occurrence of one shared non-structural rule per side is simply foldable, the
five designated axiom sources are coherence peaks, two non-structural peak
steps otherwise make a Kelly peak, and the rest are weak Kelly peaks.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum

from .diagram import (
    GATE_IN,
    GATE_OUT,
    Diagram,
    DiagramError,
    canonical_with_emission,
    gate,
    identity,
    par_compose,
    parse,
    seq_compose,
)
from .rewrite import (
    Redex,
    RewritePath,
    RewriteStep,
    find_redexes,
    make_step,
    normalize,
    structural_normal_form,
)
from .rules import Rule, RuleSet


class NotJoinable(DiagramError):
    pass


class ShapeMismatch(DiagramError):
    pass


class PeakClass(Enum):
    COHERENCE = "coherence"
    KELLY = "kelly"
    WEAK_KELLY = "weak-kelly"
    SIMPLY_FOLDABLE = "simply-foldable"
    STRONGLY_FOLDABLE = "strongly-foldable"


@dataclass(frozen=True)
class CriticalPeak:
    source: Diagram
    left: Redex
    right: Redex

    def key(self) -> tuple:
        a, b = sorted((self.left.key(), self.right.key()))
        return (self.source.to_expr(), a, b)

    def __str__(self) -> str:
        return f"{self.source.to_expr()}  [{self.left} | {self.right}]"


@dataclass(frozen=True)
class JoinResult:
    left_path: RewritePath
    right_path: RewritePath
    meet: Diagram


# -- superposition of two left sides ------------------------------------------


def _amalgamate(lhs1: Diagram, lhs2: Diagram, seed: tuple[int, int]):
    """Glue lhs1 and lhs2 identifying gate seed[0] with seed[1], then close
    under the identifications forced by shared wires.  Returns (kinds,
    producers, embeddings) or None if the gluing is inconsistent.

    Labels are (side, gate); identified classes are represented by their
    union-find root.  producers[label][i] is another label's output port
    (label, o) or a dangling-input marker ("dangle", label, i).
    """
    pgs = (lhs1.port_graph(), lhs2.port_graph())
    parent: dict[tuple, tuple] = {}

    def find(x):
        root = x
        while parent.get(root, root) != root:
            root = parent[root]
        while parent.get(x, x) != x:
            parent[x], x = root, parent[x]
        return root

    def union(a, b) -> bool:
        ra, rb = find(a), find(b)
        if ra == rb:
            return True
        if pgs[ra[0]].kinds[ra[1]] != pgs[rb[0]].kinds[rb[1]]:
            return False
        if ra[0] == rb[0]:
            return False  # cannot identify two gates of the same side
        parent[rb] = ra
        return True

    if not union((0, seed[0]), (1, seed[1])):
        return None

    changed = True
    while changed:
        changed = False
        classes: dict[tuple, list[tuple]] = {}
        for side in (0, 1):
            for g in range(pgs[side].gate_count()):
                classes.setdefault(find((side, g)), []).append((side, g))
        for members in classes.values():
            if len(members) != 2:
                continue
            (s1, g1), (s2, g2) = members
            kind = pgs[s1].kinds[g1]
            for i in range(GATE_IN[kind]):
                p1, p2 = pgs[s1].producers[g1][i], pgs[s2].producers[g2][i]
                if p1[0] != "in" and p2[0] != "in":
                    if p1[1] != p2[1]:
                        return None
                    a, b = (s1, p1[0]), (s2, p2[0])
                    if find(a) != find(b):
                        if not union(a, b):
                            return None
                        changed = True
            for o in range(GATE_OUT[kind]):
                c1, c2 = pgs[s1].consumer[(g1, o)], pgs[s2].consumer[(g2, o)]
                if c1[0] == "gate" and c2[0] == "gate":
                    if c1[2] != c2[2]:
                        return None
                    a, b = (s1, c1[1]), (s2, c2[1])
                    if find(a) != find(b):
                        if not union(a, b):
                            return None
                        changed = True

    emb = ({g: find((0, g)) for g in range(pgs[0].gate_count())},
           {g: find((1, g)) for g in range(pgs[1].gate_count())})
    labels = sorted(set(emb[0].values()) | set(emb[1].values()))
    kinds = {}
    members_of: dict[tuple, list[tuple]] = {lab: [] for lab in labels}
    for side in (0, 1):
        for g, lab in emb[side].items():
            kinds[lab] = pgs[side].kinds[g]
            members_of[lab].append((side, g))

    producers: dict[tuple, list] = {}
    consumers: dict[tuple, tuple] = {}
    for lab in labels:
        prods = []
        for i in range(GATE_IN[kinds[lab]]):
            feeds = set()
            for side, g in members_of[lab]:
                p = pgs[side].producers[g][i]
                if p[0] != "in":
                    feeds.add((emb[side][p[0]], p[1]))
            if len(feeds) > 1:
                return None
            prods.append(feeds.pop() if feeds else ("dangle", lab, i))
        producers[lab] = prods
    for lab in labels:
        for o in range(GATE_OUT[kinds[lab]]):
            eaters = set()
            for side, g in members_of[lab]:
                c = pgs[side].consumer[(g, o)]
                if c[0] == "gate":
                    eaters.add((emb[side][c[1]], c[2]))
            if len(eaters) > 1:
                return None  # one output, two distinct consumers
            if eaters:
                consumers[(lab, o)] = eaters.pop()
    for lab in labels:
        for i, p in enumerate(producers[lab]):
            if p[0] != "dangle" and consumers.get((p[0], p[1])) != (lab, i):
                return None
    return kinds, producers, emb


def _realize(kinds: dict, producers: dict) -> list[tuple[Diagram, dict]]:
    """All planar diagrams whose port graph matches the amalgam, each with the
    label -> canonical-gate correspondence.  Branches over the interface order
    of dangling inputs and the planar slots of e gates; the firing order of
    the remaining gates cannot change the canonical form."""
    labels = sorted(kinds)
    danglings = [p for lab in labels for p in producers[lab] if p[0] == "dangle"]
    results: dict[tuple, tuple[Diagram, dict]] = {}

    def assemble(emitted: list, n_in: int):
        raw = [(off, kinds[lab]) for lab, off in emitted]
        try:
            diag, emission = canonical_with_emission(n_in, raw)
        except DiagramError:
            return
        corr = {emitted[raw_idx][0]: canon for canon, raw_idx in enumerate(emission)}
        key = (diag, tuple(sorted(corr.items())))
        results.setdefault(key, (diag, corr))

    def run(frontier: list, unfired: set, emitted: list, n_in: int):
        # fire ready non-e gates deterministically until only e gates remain
        progress = True
        frontier = list(frontier)
        emitted = list(emitted)
        unfired = set(unfired)
        while progress:
            progress = False
            for lab in labels:
                if lab not in unfired or kinds[lab] == "e":
                    continue
                prods = producers[lab]
                if any(p[0] != "dangle" and p[0] in unfired for p in prods):
                    continue
                try:
                    pos = frontier.index(prods[0])
                except ValueError:
                    continue
                if frontier[pos:pos + len(prods)] != prods:
                    continue
                frontier[pos:pos + len(prods)] = [(lab, o) for o in range(GATE_OUT[kinds[lab]])]
                emitted.append((lab, pos))
                unfired.discard(lab)
                progress = True
        es = [lab for lab in labels if lab in unfired and kinds[lab] == "e"]
        if not es:
            if unfired:
                return  # blocked: this input order is not planar-realizable
            assemble(emitted, n_in)
            return
        lab = es[0]
        for pos in range(len(frontier) + 1):
            f2 = list(frontier)
            f2.insert(pos, (lab, 0))
            run(f2, unfired - {lab}, emitted + [(lab, pos)], n_in)

    for perm in itertools.permutations(danglings):
        run(list(perm), set(labels), [], len(danglings))
    return [results[k] for k in sorted(results, key=lambda k: (k[0].to_expr(), k[1]))]


def _superposition_peaks(rules: RuleSet) -> list[CriticalPeak]:
    out: dict[tuple, CriticalPeak] = {}
    pairs = itertools.combinations_with_replacement(range(len(rules.rules)), 2)
    for i1, i2 in pairs:
        r1, r2 = rules.rules[i1], rules.rules[i2]
        for g1 in range(r1.lhs.gate_count()):
            for g2 in range(r2.lhs.gate_count()):
                glued = _amalgamate(r1.lhs, r2.lhs, (g1, g2))
                if glued is None:
                    continue
                kinds, producers, emb = glued
                for diag, corr in _realize(kinds, producers):
                    gates1 = tuple(sorted(corr[emb[0][g]] for g in emb[0]))
                    gates2 = tuple(sorted(corr[emb[1][g]] for g in emb[1]))
                    if r1.name == r2.name and gates1 == gates2:
                        continue  # the two redexes coincide
                    red1 = _redex_at(diag, r1, gates1)
                    red2 = _redex_at(diag, r2, gates2)
                    if red1 is None or red2 is None:
                        continue
                    peak = CriticalPeak(diag, red1, red2)
                    out.setdefault(peak.key(), peak)
    return list(out.values())


def _redex_at(host: Diagram, rule: Rule, gates: tuple[int, ...]) -> Redex | None:
    for occ in find_redexes(host, RuleSet("one", (rule,))):
        if occ.gates == gates:
            return occ
    return None


# -- the six indexed conflict families ----------------------------------------
#
# Each family overlaps an upper three-gate structural redex with a lower redex
# in their shared middle gate, an inner diagram phi : 1+n -> 1+m woven between
# them: phi's leftmost input is the right output of the upper redex's second
# gate, and phi's leftmost output is the right input of the lower redex's
# second gate.  The inner gates belong to neither redex, so these peaks are
# not plain superpositions.  Upper rule, lower rule, and the lower tail shape
# per family:

FAMILY_SPECS: dict[int, tuple[str, str, tuple[str, ...]]] = {
    1: ("yb", "yb", ("s", "s")),  # lower = (s*1);(1*s);(s*1) continuing the shared gate
    2: ("yb", "sms", ("m", "s")),
    3: ("ssm", "ms", ("s",)),
    4: ("yb", "ssm", ("s", "m")),
    5: ("yb", "gamma", ("m", "m")),
    6: ("ssm", "alpha", ("m",)),
}

INNER_REPRESENTATIVES = ("id1", "s", "m")


def reduce_global(family_id: int, inner: Diagram, rules: RuleSet) -> CriticalPeak:
    """Instantiate a global-conflict family at the structural normal form of
    `inner`, which must have at least one input and one output."""
    if family_id not in FAMILY_SPECS:
        raise ShapeMismatch(f"no conflict family {family_id}")
    if inner.inputs < 1 or inner.outputs < 1:
        raise ShapeMismatch("inner diagram needs shape 1+n -> 1+m")
    reduced, _ = structural_normal_form(inner)
    return _family_instance(family_id, reduced, rules)


def _family_instance(family_id: int, inner: Diagram, rules: RuleSet) -> CriticalPeak:
    upper_name, lower_name, tail = FAMILY_SPECS[family_id]
    n = inner.inputs - 1
    m = inner.outputs - 1
    third = "s" if upper_name == "yb" else "m"
    parts = [
        par_compose(gate("s"), identity(1 + n)),
        par_compose(par_compose(identity(1), gate("s")), identity(n)),
        par_compose(gate(third), inner),
    ]
    if len(tail) == 2:
        # three-gate lower redex: its middle gate consumes the shared gate's
        # right output and the inner's leftmost output, the closer sits at 0
        parts.append(par_compose(par_compose(identity(1), gate(tail[0])), identity(m)))
        width = parts[-1].outputs
        parts.append(par_compose(gate(tail[1]), identity(width - GATE_IN[tail[1]])))
    else:
        # two-gate lower redex: the closer consumes the shared gate's output
        # and the inner's leftmost output directly
        width = parts[-1].outputs
        parts.append(par_compose(gate(tail[0]), identity(width - GATE_IN[tail[0]])))
    source = parts[0]
    for p in parts[1:]:
        source = seq_compose(source, p)

    upper_rule = rules[upper_name]
    lower_rule = rules[lower_name]
    uppers = [r for r in find_redexes(source, RuleSet("u", (upper_rule,)))]
    lowers = [r for r in find_redexes(source, RuleSet("l", (lower_rule,)))]
    inner_gates = inner.gate_count()
    want_union = source.gate_count()
    for ru in uppers:
        for rl in lowers:
            shared = set(ru.gates) & set(rl.gates)
            if len(shared) != 1:
                continue
            if len(set(ru.gates) | set(rl.gates)) + inner_gates != want_union:
                continue
            if ru.key() == rl.key():
                continue
            return CriticalPeak(source, ru, rl)
    raise ShapeMismatch(f"family {family_id} with inner {inner.to_expr()} "
                        "does not form the expected overlap")


def _family_peaks(rules: RuleSet) -> list[CriticalPeak]:
    names = {r.name for r in rules}
    out = []
    for fam, (u, l, _) in FAMILY_SPECS.items():
        if u not in names or l not in names:
            continue
        for rep in INNER_REPRESENTATIVES:
            out.append(_family_instance(fam, parse(rep), rules))
    return out


# -- enumeration, joining, classification --------------------------------------


def enumerate_peaks(rules: RuleSet, bound: int = 4) -> list[CriticalPeak]:
    """All critical peaks of the rule set: plain superpositions plus the
    reduced instances of the six conflict families (for rule sets containing
    the structural rules).  `bound` must cover the largest left side."""
    max_lhs = max(r.lhs.gate_count() for r in rules)
    if bound < max_lhs:
        raise ValueError(f"bound {bound} below the largest left side ({max_lhs})")
    peaks: dict[tuple, CriticalPeak] = {}
    for p in _superposition_peaks(rules):
        peaks.setdefault(p.key(), p)
    for p in _family_peaks(rules):
        peaks.setdefault(p.key(), p)
    return [peaks[k] for k in sorted(peaks, key=lambda k: (k[0].count(";"), k))]


def join(peak: CriticalPeak, rules: RuleSet, budget: int | None = None) -> JoinResult:
    """Normalize both branches; the meet is their common normal form."""
    left = make_step(peak.left)
    right = make_step(peak.right)
    nf_l, path_l = normalize(left.target, rules, budget=budget)
    nf_r, path_r = normalize(right.target, rules, budget=budget)
    if nf_l != nf_r:
        raise NotJoinable(f"branches end at {nf_l.to_expr()} and {nf_r.to_expr()}")
    return JoinResult(RewritePath((left,) + path_l.steps),
                      RewritePath((right,) + path_r.steps), nf_l)


COHERENCE_SOURCES = tuple(parse(t) for t in (
    "(m*id2);(m*id1);m",      # associator against itself
    "(id1*e*id1);(m*id1);m",  # unit in the middle
    "s;s;m",                  # involution against the braiding
    "(s*id1);(m*id1);m",      # braiding against the associator
    "(m*id1);s;m",            # product slid through the braiding
))


def classify(peak: CriticalPeak, j: JoinResult, rules: RuleSet) -> PeakClass:
    def structural(name: str) -> bool:
        return rules[name].structural

    sides = (tuple(s.rule.name for s in j.left_path),
             tuple(s.rule.name for s in j.right_path))
    if all(structural(n) for side in sides for n in side):
        return PeakClass.STRONGLY_FOLDABLE
    nonstructs = [tuple(n for n in side if not structural(n)) for side in sides]
    if (len(nonstructs[0]) == 1 and len(nonstructs[1]) == 1
            and nonstructs[0] == nonstructs[1]):
        return PeakClass.SIMPLY_FOLDABLE
    if peak.source in COHERENCE_SOURCES:
        return PeakClass.COHERENCE
    if not structural(peak.left.rule.name) and not structural(peak.right.rule.name):
        return PeakClass.KELLY
    return PeakClass.WEAK_KELLY


@dataclass(frozen=True)
class PeakReport:
    peak: CriticalPeak
    join: JoinResult | None
    peak_class: PeakClass | None
    failure: str | None = None


@dataclass(frozen=True)
class ConfluenceReport:
    ruleset: str
    reports: tuple[PeakReport, ...]

    @property
    def confluent(self) -> bool:
        return all(r.join is not None for r in self.reports)

    def counts(self) -> dict[PeakClass, int]:
        out = {c: 0 for c in PeakClass}
        for r in self.reports:
            if r.peak_class is not None:
                out[r.peak_class] += 1
        return out

    def render(self) -> str:
        lines = [f"critical peaks of rule set {self.ruleset}: {len(self.reports)}"]
        for r in self.reports:
            if r.join is None:
                lines.append(f"  NOT JOINABLE  {r.peak}  ({r.failure})")
            else:
                lines.append(f"  {r.peak_class.value:17s} {r.peak.source.to_expr()}"
                             f"  [{r.peak.left} | {r.peak.right}]"
                             f"  joins in {len(r.join.left_path)}/{len(r.join.right_path)}")
        if self.confluent:
            c = self.counts()
            lines.append("locally confluent; classes: "
                         + " ".join(f"{c[k]} {k.value}" for k in PeakClass))
        else:
            lines.append("NOT locally confluent")
        return "\n".join(lines)


def local_confluence_report(rules: RuleSet, bound: int = 4,
                            budget: int | None = None) -> ConfluenceReport:
    from .rewrite import BudgetExhausted

    reports = []
    for peak in enumerate_peaks(rules, bound):
        try:
            jr = join(peak, rules, budget=budget)
            reports.append(PeakReport(peak, jr, classify(peak, jr, rules)))
        except (NotJoinable, BudgetExhausted) as exc:
            reports.append(PeakReport(peak, None, None, failure=str(exc)))
    return ConfluenceReport(rules.name, tuple(reports))
