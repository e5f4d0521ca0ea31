"""
Coherence certificates: replayable surgery scripts between parallel zigzags.

A certificate transforms its source zigzag into its target move for move.
Each surgery is one of three operations, all anchored to explicit diagrams and
redexes so a replayer can re-derive and verify everything:

  * peak: a local peak <-u D v-> is traded for the valley through the
    critical-peak cell of (u, v) (or a disjoint_square when the redexes do not
    overlap); the inverse direction digs the peak back out of a valley;

  * cell: a run of same-direction moves matching one embedded boundary side of
    a four-cell is replaced by the other side;

  * stale: a step immediately undone by its formal inverse is cancelled, or
    such a pair is inserted.

The generator first eliminates backward-forward peaks (valley conversion),
extends the valley legs to the common normal form with inserted stale pairs,
then rewrites both legs into the leftmost normalization path, recursing along
the termination order.  Certifying two parallel zigzags routes both through
that canonical valley; the target's surgeries are appended inverted.

Overlapping step pairs that match no catalogued peak cell in context (indexed
conflict families at inner diagrams other than the reduced representatives)
are resolved through a mediating third redex at the same diagram; the two
smaller squares then match the catalog.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .cells import CellCatalog, FourCell, catalog
from .diagram import Diagram, DiagramError
from .rewrite import (
    Occurrence,
    RewriteStep,
    canonical_path,
    find_occurrences,
    find_redexes,
    make_step,
    step_at,
    transport_step,
)
from .rules import RuleSet
from .zigzag import Move, ZigzagPath


class NotParallel(DiagramError):
    pass


class CertificationError(DiagramError):
    pass


# -- surgery records -----------------------------------------------------------


@dataclass(frozen=True)
class Surgery:
    pos: int
    op: str  # "peak" | "cell" | "stale"
    direction: str  # "fwd" | "bwd": forward or inverse application
    cell: str  # cell name; "disjoint_square" / "stale_cancel" for plumbing
    at: str  # expression of the anchor diagram
    u: tuple[str, tuple[int, ...]] | None = None  # (rule, gates) in `at`
    v: tuple[str, tuple[int, ...]] | None = None
    block: tuple[int, ...] | None = None  # embedded cell-source gates in `at`
    movedir: str | None = None  # cell op: orientation of the replaced run
    pair: str | None = None  # stale op: "fb" | "bf"

    def inverse(self) -> "Surgery":
        return replace(self, direction="bwd" if self.direction == "fwd" else "fwd")

    def line(self) -> str:
        parts = [f"SURGERY {self.pos} {self.op} {self.direction} {self.cell}",
                 f"at={self.at}"]
        if self.u is not None:
            parts.append(f"u={self.u[0]}@{','.join(map(str, self.u[1]))}")
        if self.v is not None:
            parts.append(f"v={self.v[0]}@{','.join(map(str, self.v[1]))}")
        if self.block is not None:
            parts.append(f"block={','.join(map(str, self.block))}")
        if self.movedir is not None:
            parts.append(f"movedir={self.movedir}")
        if self.pair is not None:
            parts.append(f"pair={self.pair}")
        return " | ".join(parts)

    @staticmethod
    def from_line(line: str) -> "Surgery":
        fields = line.split(" | ")
        head = fields[0].split()
        if len(head) != 5 or head[0] != "SURGERY":
            raise CertificationError(f"bad surgery line {line!r}")
        kw: dict = {"pos": int(head[1]), "op": head[2], "direction": head[3],
                    "cell": head[4], "at": ""}
        for f in fields[1:]:
            key, _, val = f.partition("=")
            if key == "at":
                kw["at"] = val
            elif key in ("u", "v"):
                rule, _, gates = val.partition("@")
                kw[key] = (rule, tuple(int(g) for g in gates.split(",") if g))
            elif key == "block":
                kw["block"] = tuple(int(g) for g in val.split(",") if g)
            elif key in ("movedir", "pair"):
                kw[key] = val
        return Surgery(**kw)


def spec_of(step: RewriteStep) -> tuple[str, tuple[int, ...]]:
    return (step.rule.name, step.gates)


# -- cell embedding -------------------------------------------------------------


@dataclass(frozen=True)
class EmbeddedCell:
    cell: FourCell
    occurrence: Occurrence
    side_a: tuple[RewriteStep, ...]
    side_b: tuple[RewriteStep, ...]


def embed_steps(occ: Occurrence, steps, rules: RuleSet) -> tuple[RewriteStep, ...]:
    """Replay pattern-level steps inside the occurrence's host, tracking the
    pattern-gate to host-gate correspondence through each rewrite."""
    gmap = {i: occ.mapping[i] for i in range(len(occ.mapping))}
    host = occ.host
    out = []
    for st in steps:
        hgates = tuple(sorted(gmap[g] for g in st.gates))
        hstep = step_at(host, rules, st.rule.name, hgates)
        out.append(hstep)
        nxt = {}
        for g_old, h_old in gmap.items():
            if g_old in st.gate_map:
                nxt[st.gate_map[g_old]] = hstep.gate_map[h_old]
        for k, g_new in enumerate(st.new_gates):
            nxt[g_new] = hstep.new_gates[k]
        gmap = nxt
        host = hstep.target
    return tuple(out)


def embed_cell(cell: FourCell, host: Diagram, block: tuple[int, ...],
               rules: RuleSet) -> list[EmbeddedCell]:
    """All embeddings of the cell's peak source into `host` covering exactly
    the given gate set."""
    out = []
    want = tuple(sorted(block))
    for occ in find_occurrences(host, cell.source):
        if occ.gates != want:
            continue
        side_a = embed_steps(occ, cell.side_a, rules)
        side_b = embed_steps(occ, cell.side_b, rules)
        out.append(EmbeddedCell(cell, occ, side_a, side_b))
    return out


# -- squares ---------------------------------------------------------------------


@dataclass(frozen=True)
class Square:
    """Filler for a coinitial step pair: [u]+ju and [v]+jv are parallel,
    justified by `cell` (a catalog cell or a disjoint square)."""

    cell: str
    u: RewriteStep
    v: RewriteStep
    ju: tuple[RewriteStep, ...]
    jv: tuple[RewriteStep, ...]
    block: tuple[int, ...] | None

    @property
    def meet(self) -> Diagram:
        return self.ju[-1].target if self.ju else self.u.target

    def swapped(self) -> "Square":
        return Square(self.cell, self.v, self.u, self.jv, self.ju, self.block)


@dataclass(frozen=True)
class MediatedSquare:
    w: RewriteStep
    first: Square  # fills (u, w)
    second: Square  # fills (w, v)


def disjoint_square(u: RewriteStep, v: RewriteStep, rules: RuleSet) -> Square:
    vu = transport_step(u, rules, v.rule.name, v.gates)
    uv = transport_step(v, rules, u.rule.name, u.gates)
    if vu.target != uv.target:
        raise CertificationError("disjoint steps do not commute")
    return Square("disjoint_square", u, v, (vu,), (uv,), None)


def resolve_square(host: Diagram, u: RewriteStep, v: RewriteStep,
                   cat: CellCatalog, rules: RuleSet,
                   mediate: bool = True) -> Square | MediatedSquare:
    if u == v:
        raise CertificationError("not a proper peak")
    if not (set(u.gates) & set(v.gates)):
        return disjoint_square(u, v, rules)
    block = tuple(sorted(set(u.gates) | set(v.gates)))
    for cell in cat.candidates(u.rule.name, v.rule.name):
        if cell.source.gate_count() != len(block):
            continue
        for emb in embed_cell(cell, host, block, rules):
            fa, fb = emb.side_a[0], emb.side_b[0]
            if (fa, fb) == (u, v):
                return Square(cell.name, u, v, emb.side_a[1:], emb.side_b[1:], block)
            if (fa, fb) == (v, u):
                return Square(cell.name, u, v, emb.side_b[1:], emb.side_a[1:], block)
    if mediate:
        for w_redex in find_redexes(host, rules):
            w = make_step(w_redex)
            if w == u or w == v:
                continue
            try:
                first = resolve_square(host, u, w, cat, rules, mediate=False)
                second = resolve_square(host, w, v, cat, rules, mediate=False)
            except CertificationError:
                continue
            return MediatedSquare(w, first, second)
    raise CertificationError(
        f"no four-cell covers the peak {u} / {v} at {host.to_expr()}")


# -- the working path -------------------------------------------------------------


class PathEditor:
    """Mutable zigzag with verified surgery application."""

    def __init__(self, zig: ZigzagPath):
        self.start = zig.start
        self.moves: list[Move] = list(zig.moves)
        self.surgeries: list[Surgery] = []
        self.effects: list[tuple[int, int, int]] = []  # (pos, old len, new len)

    def zigzag(self) -> ZigzagPath:
        return ZigzagPath(self.start, tuple(self.moves))

    def diagram_at(self, pos: int) -> Diagram:
        at = self.start
        for mv in self.moves[:pos]:
            at = mv.dst
        return at

    def fwd_extent(self) -> int:
        for i, m in enumerate(self.moves):
            if not m.forward:
                return i
        return len(self.moves)

    # -- emitters ------------------------------------------------------------

    def emit_stale_cancel(self, pos: int) -> None:
        a, b = self.moves[pos], self.moves[pos + 1]
        if a.step != b.step or a.forward == b.forward:
            raise CertificationError("stale cancel needs a step and its inverse")
        pair = "fb" if a.forward else "bf"
        self.surgeries.append(Surgery(pos, "stale", "fwd", "stale_cancel",
                                      a.step.source.to_expr(), u=spec_of(a.step),
                                      pair=pair))
        self.effects.append((pos, 2, 0))
        del self.moves[pos:pos + 2]

    def emit_stale_insert(self, pos: int, step: RewriteStep, pair: str) -> None:
        anchor = step.source if pair == "fb" else step.target
        if self.diagram_at(pos) != anchor:
            raise CertificationError("stale insert does not anchor")
        self.surgeries.append(Surgery(pos, "stale", "bwd", "stale_cancel",
                                      step.source.to_expr(), u=spec_of(step),
                                      pair=pair))
        self.effects.append((pos, 0, 2))
        if pair == "fb":
            self.moves[pos:pos] = [Move(step, True), Move(step, False)]
        else:
            self.moves[pos:pos] = [Move(step, False), Move(step, True)]

    def emit_peak_fill(self, pos: int, sq: Square) -> None:
        a, b = self.moves[pos], self.moves[pos + 1]
        if a.forward or not b.forward or a.step != sq.u or b.step != sq.v:
            raise CertificationError("peak surgery does not match the path")
        self.surgeries.append(Surgery(pos, "peak", "fwd", sq.cell,
                                      sq.u.source.to_expr(), u=spec_of(sq.u),
                                      v=spec_of(sq.v), block=sq.block))
        seg = [Move(s, True) for s in sq.ju] + [Move(s, False) for s in reversed(sq.jv)]
        self.effects.append((pos, 2, len(seg)))
        self.moves[pos:pos + 2] = seg

    def emit_cell(self, pos: int, sq: Square, movedir: str) -> None:
        """Replace the run [u]+ju by [v]+jv (movedir fwd), or its reversal."""
        old = [Move(sq.u, True)] + [Move(s, True) for s in sq.ju]
        new = [Move(sq.v, True)] + [Move(s, True) for s in sq.jv]
        if movedir == "bwd":
            old = [m.flipped() for m in reversed(old)]
            new = [m.flipped() for m in reversed(new)]
        if self.moves[pos:pos + len(old)] != old:
            raise CertificationError("cell surgery does not match the path")
        self.surgeries.append(Surgery(pos, "cell", "fwd", sq.cell,
                                      sq.u.source.to_expr(), u=spec_of(sq.u),
                                      v=spec_of(sq.v), block=sq.block,
                                      movedir=movedir))
        self.effects.append((pos, len(old), len(new)))
        self.moves[pos:pos + len(old)] = new


# -- the generator ----------------------------------------------------------------


class Certifier:
    def __init__(self, rules: RuleSet, cat: CellCatalog | None = None):
        self.rules = rules
        self.cat = cat if cat is not None else catalog(rules.name)
        self._can_cache: dict[Diagram, tuple[RewriteStep, ...]] = {}

    def can(self, d: Diagram) -> tuple[RewriteStep, ...]:
        got = self._can_cache.get(d)
        if got is None:
            got = tuple(canonical_path(d, self.rules))
            self._can_cache[d] = got
        return got

    # -- phase 1: eliminate backward-forward peaks -----------------------------

    def _to_valley(self, ed: PathEditor) -> None:
        guard = 0
        while True:
            guard += 1
            if guard > 100_000:
                raise CertificationError("valley conversion does not settle")
            action = None
            for i in range(len(ed.moves) - 1):
                a, b = ed.moves[i], ed.moves[i + 1]
                if a.step == b.step and a.forward != b.forward:
                    action = ("cancel", i)
                    break
                if not a.forward and b.forward:
                    action = ("peak", i)
                    break
            if action is None:
                return
            kind, i = action
            if kind == "cancel":
                ed.emit_stale_cancel(i)
                continue
            u, v = ed.moves[i].step, ed.moves[i + 1].step
            plan = resolve_square(u.source, u, v, self.cat, self.rules)
            if isinstance(plan, Square):
                ed.emit_peak_fill(i, plan)
            else:
                ed.emit_stale_insert(i + 1, plan.w, "fb")
                ed.emit_peak_fill(i, plan.first)
                # the remaining (w bwd)(v fwd) peak is picked up by the loop

    # -- phase 2: extend the valley legs to the normal form ---------------------

    def _extend_to_nf(self, ed: PathEditor) -> None:
        mid = ed.fwd_extent()
        omega = ed.diagram_at(mid)
        for k, st in enumerate(self.can(omega)):
            ed.emit_stale_insert(mid + k, st, "fb")

    # -- phase 3: rewrite each leg into the leftmost normalization --------------

    def _leg(self, ed: PathEditor, backward: bool) -> list[RewriteStep]:
        mid = ed.fwd_extent()
        if backward:
            return [m.step for m in reversed(ed.moves[mid:])]
        return [m.step for m in ed.moves[:mid]]

    def _abs_pos(self, ed: PathEditor, pos: int, length: int, backward: bool) -> int:
        if not backward:
            return pos
        return len(ed.moves) - pos - length

    def _fill_leg(self, ed: PathEditor, pos: int, target, backward: bool) -> None:
        """Make the leg (logical forward reading) from index `pos` equal
        `target`; both run from the same diagram to the common normal form."""
        q = list(target)
        guard = 0
        while True:
            guard += 1
            if guard > 100_000:
                raise CertificationError("leg filling does not settle")
            p = self._leg(ed, backward)[pos:]
            k = 0
            while k < len(p) and k < len(q) and p[k] == q[k]:
                k += 1
            p, q, pos = p[k:], q[k:], pos + k
            if not p and not q:
                return
            if not p or not q:
                raise CertificationError("legs end at different diagrams")
            u, v = p[0], q[0]
            plan = resolve_square(u.source, u, v, self.cat, self.rules)
            if isinstance(plan, Square):
                self._apply_square(ed, pos, plan, backward)
            else:
                self._apply_square(ed, pos, plan.first, backward)
                self._apply_square(ed, pos, plan.second, backward)

    def _apply_square(self, ed: PathEditor, pos: int, sq: Square, backward: bool) -> None:
        """Rewrite the live leg head [u]+rest into [v]+jv+can(meet)."""
        tail = self.can(sq.meet)
        self._fill_leg(ed, pos + 1, list(sq.ju) + list(tail), backward)
        ed.emit_cell(self._abs_pos(ed, pos, 1 + len(sq.ju), backward), sq,
                     "bwd" if backward else "fwd")

    # -- public -------------------------------------------------------------------

    def to_canonical_valley(self, zig: ZigzagPath) -> tuple[list[Surgery], ZigzagPath]:
        ed = PathEditor(zig)
        self._to_valley(ed)
        self._extend_to_nf(ed)
        self._fill_leg(ed, 0, self.can(zig.start), backward=False)
        self._fill_leg(ed, 0, self.can(zig.end), backward=True)
        return ed.surgeries, ed.zigzag()

    def certify(self, z1: ZigzagPath, z2: ZigzagPath) -> "Certificate":
        if z1.start != z2.start or z1.end != z2.end:
            raise NotParallel("zigzags must share start and end")
        s1, v1 = self.to_canonical_valley(z1)
        s2, v2 = self.to_canonical_valley(z2)
        if v1 != v2:
            raise CertificationError("canonical valleys disagree")
        surgeries = list(s1) + [s.inverse() for s in reversed(s2)]
        return Certificate(self.rules.name, z1, z2, tuple(surgeries))


def certify_equal(z1: ZigzagPath, z2: ZigzagPath, rules: RuleSet) -> "Certificate":
    return Certifier(rules).certify(z1, z2)


# -- certificates ---------------------------------------------------------------


@dataclass(frozen=True)
class Certificate:
    ruleset: str
    source: ZigzagPath
    target: ZigzagPath
    surgeries: tuple[Surgery, ...]

    def non_plumbing_cells(self) -> list[str]:
        return [s.cell for s in self.surgeries
                if s.cell not in ("disjoint_square", "stale_cancel")]

    def render(self) -> str:
        lines = ["CERT mesdiag-1", f"RULES {self.ruleset}"]
        lines.append(f"SOURCE {self.source.start.to_expr()}")
        lines.append("SMOVES " + " ".join(str(m) for m in self.source.moves))
        lines.append(f"TARGET {self.target.start.to_expr()}")
        lines.append("TMOVES " + " ".join(str(m) for m in self.target.moves))
        lines += [s.line() for s in self.surgeries]
        lines.append("END")
        return "\n".join(lines) + "\n"
