"""
Independent certificate replay.

The validator re-derives every surgery from its anchors and replays it against
the current path, sharing only the diagram representation (and the cell
catalog, which is data) with the generator.  Rule application is implemented
here from scratch: a claimed redex is checked by exhibiting a schedule of the
host with the matched block contiguous, found by backtracking search over
firing orders rather than the engine's greedy factorization.
"""

from __future__ import annotations

import itertools

from .cells import CellCatalog, FourCell, catalog
from .diagram import (
    GATE_IN,
    GATE_OUT,
    Diagram,
    _desc_keys,
    canonical_with_emission,
    parse,
)
from .rewrite import RewriteStep
from .rules import Rule, RuleSet
from .zigzag import Move, ZigzagPath


class ReplayError(Exception):
    pass


# -- independent rule application ------------------------------------------------


def _correspondences(pattern: Diagram, host: Diagram, gates: tuple[int, ...]):
    """All wire-consistent bijections pattern gate -> host gate onto `gates`."""
    ppg, hpg = pattern.port_graph(), host.port_graph()
    n = pattern.gate_count()
    if n != len(gates):
        return
    for perm in itertools.permutations(gates):
        if any(ppg.kinds[i] != hpg.kinds[perm[i]] for i in range(n)):
            continue
        ok = True
        for i in range(n):
            for port, src in enumerate(ppg.producers[i]):
                hsrc = hpg.producers[perm[i]][port]
                if src[0] == "in":
                    if hsrc[0] != "in" and hsrc[0] in perm:
                        ok = False  # pattern boundary fed from inside the block
                        break
                elif hsrc != (perm[src[0]], src[1]):
                    ok = False
                    break
            if not ok:
                break
            for o in range(GATE_OUT[ppg.kinds[i]]):
                dst = ppg.consumer[(i, o)]
                hdst = hpg.consumer[(perm[i], o)]
                if dst[0] == "gate":
                    if hdst[0] != "gate" or hdst[1] != perm[dst[1]] or hdst[2] != dst[2]:
                        ok = False
                        break
                elif hdst[0] == "gate" and hdst[1] in perm:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            yield perm


def _fire(hpg, keys, frontier: list, g: int):
    """Fire gate g on the frontier; returns (new frontier, offset) or None."""
    kind = hpg.kinds[g]
    a = GATE_IN[kind]
    if a == 0:
        k = keys[(g, 0)]
        pos = sum(1 for t in frontier if keys[t] < k)
    else:
        try:
            pos = frontier.index(hpg.producers[g][0])
        except ValueError:
            return None
        if frontier[pos:pos + a] != list(hpg.producers[g]):
            return None
    nf = list(frontier)
    nf[pos:pos + a] = [(g, o) for o in range(GATE_OUT[kind])]
    return nf, pos


def _forced_schedule(host: Diagram, pattern: Diagram, mapping: tuple[int, ...]):
    """Backtracking search for a schedule of `host` shaped up ++ block ++ down
    with the block's gates contiguous in pattern slice order.  Returns a list
    of events ("gate", g, offset, kind) with one ("block", a) marker, or None.
    """
    hpg = host.port_graph()
    keys = _desc_keys(hpg)
    n = host.gate_count()
    block_set = set(mapping)

    ppg = pattern.port_graph()
    ext_inputs = []
    for j in range(pattern.inputs):
        cons = ppg.consumer[("in", j)]
        if cons[0] != "gate":
            return None
        ext_inputs.append(hpg.producers[mapping[cons[1]]][cons[2]])

    def try_block(frontier: list):
        if ext_inputs:
            try:
                a = frontier.index(ext_inputs[0])
            except ValueError:
                return None
            if frontier[a:a + len(ext_inputs)] != ext_inputs:
                return None
        else:
            first_out = ppg.out_tokens[0]
            tok = (mapping[first_out[0]], first_out[1])
            a = sum(1 for t in frontier if keys[t] < keys[tok])
        f = list(frontier)
        for b_idx, (pleft, _) in enumerate(pattern.slices):
            got = _fire(hpg, keys, f, mapping[b_idx])
            if got is None or got[1] != a + pleft:
                return None
            f = got[0]
        return f, a

    seen: set = set()

    def search(frontier: list, fired: frozenset, block_done: bool):
        state = (tuple(frontier), fired, block_done)
        if state in seen:
            return None
        seen.add(state)
        if len(fired) == n:
            return [] if frontier == list(hpg.out_tokens) else None
        if not block_done:
            got = try_block(frontier)
            if got is not None:
                f2, a = got
                sub = search(f2, fired | block_set, True)
                if sub is not None:
                    return [("block", a)] + sub
        for g in range(n):
            if g in fired or g in block_set:
                continue
            if any(t[0] != "in" and t[0] not in fired for t in hpg.producers[g]):
                continue
            got = _fire(hpg, keys, frontier, g)
            if got is None:
                continue
            sub = search(got[0], fired | {g}, block_done)
            if sub is not None:
                return [("gate", g, got[1], hpg.kinds[g])] + sub
        return None

    return search([("in", i) for i in range(host.inputs)], frozenset(), False)


def apply_at(host: Diagram, rule: Rule, gates: tuple[int, ...]) -> RewriteStep:
    """Re-derive the step applying `rule` at the given gate set, from scratch."""
    for mapping in _correspondences(rule.lhs, host, tuple(sorted(gates))):
        events = _forced_schedule(host, rule.lhs, mapping)
        if events is None:
            continue
        slices = []
        labels = []
        for ev in events:
            if ev[0] == "gate":
                _, g, pos, kind = ev
                slices.append((pos, kind))
                labels.append(("old", g))
            else:
                _, a = ev
                for i, (pleft, pkind) in enumerate(rule.rhs.slices):
                    slices.append((a + pleft, pkind))
                    labels.append(("new", i))
        target, emission = canonical_with_emission(host.inputs, slices)
        gate_map = {}
        new_gates = {}
        for new_idx, raw_idx in enumerate(emission):
            tag, val = labels[raw_idx]
            if tag == "old":
                gate_map[val] = new_idx
            else:
                new_gates[val] = new_idx
        return RewriteStep(host, target, rule, tuple(sorted(gates)), gate_map,
                           tuple(new_gates[i] for i in range(rule.rhs.gate_count())))
    raise ReplayError(f"{rule.name}@{','.join(map(str, gates))} is not a redex "
                      f"of {host.to_expr()}")


# -- cell embedding (validator side) ----------------------------------------------


def _embed_sides(cell: FourCell, host: Diagram, block: tuple[int, ...],
                 rules: RuleSet):
    """All embeddings of the cell boundary at the given block, as pairs of
    host-level step tuples."""
    out = []
    for mapping in _correspondences(cell.source, host, tuple(sorted(block))):
        if _forced_schedule(host, cell.source, mapping) is None:
            continue
        sides = []
        good = True
        for side in (cell.side_a, cell.side_b):
            gmap = {i: mapping[i] for i in range(len(mapping))}
            cur = host
            steps = []
            for st in side:
                hgates = tuple(sorted(gmap[g] for g in st.gates))
                try:
                    hstep = apply_at(cur, rules[st.rule.name], hgates)
                except ReplayError:
                    good = False
                    break
                steps.append(hstep)
                nxt = {}
                for g_old, h_old in gmap.items():
                    if g_old in st.gate_map:
                        nxt[st.gate_map[g_old]] = hstep.gate_map[h_old]
                for k, g_new in enumerate(st.new_gates):
                    nxt[g_new] = hstep.new_gates[k]
                gmap = nxt
                cur = hstep.target
            if not good:
                break
            sides.append(tuple(steps))
        if good:
            out.append((sides[0], sides[1]))
    return out


def _square_sides(surg, rules: RuleSet, cat: CellCatalog):
    """Re-derive the two boundary sides [u]+ju / [v]+jv for a peak or cell
    surgery from its anchors."""
    host = parse(surg.at)
    u = apply_at(host, rules[surg.u[0]], surg.u[1])
    v = apply_at(host, rules[surg.v[0]], surg.v[1])
    if surg.cell == "disjoint_square":
        if set(u.gates) & set(v.gates):
            raise ReplayError("disjoint_square with overlapping redexes")
        vu = apply_at(u.target, rules[surg.v[0]],
                      tuple(sorted(u.gate_map[g] for g in v.gates)))
        uv = apply_at(v.target, rules[surg.u[0]],
                      tuple(sorted(v.gate_map[g] for g in u.gates)))
        if vu.target != uv.target:
            raise ReplayError("disjoint steps do not commute")
        return (u, (vu,)), (v, (uv,))
    if surg.cell not in cat:
        raise ReplayError(f"unknown cell {surg.cell!r}")
    cell = cat[surg.cell]
    block = surg.block if surg.block is not None else tuple(
        sorted(set(u.gates) | set(v.gates)))
    for side_a, side_b in _embed_sides(cell, host, block, rules):
        if side_a and side_b and (side_a[0], side_b[0]) == (u, v):
            return (u, side_a[1:]), (v, side_b[1:])
        if side_a and side_b and (side_a[0], side_b[0]) == (v, u):
            return (u, side_b[1:]), (v, side_a[1:])
    raise ReplayError(f"cell {surg.cell} does not embed at {surg.at} "
                      f"with redexes {surg.u}/{surg.v}")


# -- surgery replay ----------------------------------------------------------------


def _diagram_at(start: Diagram, moves: list[Move], pos: int) -> Diagram:
    at = start
    for mv in moves[:pos]:
        at = mv.dst
    return at


def _check_segment(moves: list[Move], pos: int, expect: list[Move]) -> None:
    got = moves[pos:pos + len(expect)]
    if got != expect:
        raise ReplayError(
            f"segment mismatch at {pos}: expected "
            f"[{' '.join(map(str, expect))}], found [{' '.join(map(str, got))}]")


def _apply_surgery(start: Diagram, moves: list[Move], surg, rules: RuleSet,
                   cat: CellCatalog) -> None:
    pos = surg.pos
    if pos < 0 or pos > len(moves):
        raise ReplayError(f"position {pos} outside the path")
    if surg.op == "stale":
        st = apply_at(parse(surg.at), rules[surg.u[0]], surg.u[1])
        if surg.pair == "fb":
            seg = [Move(st, True), Move(st, False)]
        elif surg.pair == "bf":
            seg = [Move(st, False), Move(st, True)]
        else:
            raise ReplayError(f"bad stale pair {surg.pair!r}")
        if surg.direction == "fwd":  # cancel
            _check_segment(moves, pos, seg)
            del moves[pos:pos + 2]
        else:  # insert
            if _diagram_at(start, moves, pos) != seg[0].src:
                raise ReplayError("stale insert does not anchor")
            moves[pos:pos] = seg
        return
    (u, ju), (v, jv) = _square_sides(surg, rules, cat)
    if surg.op == "peak":
        peak_seg = [Move(u, False), Move(v, True)]
        valley_seg = ([Move(s, True) for s in ju]
                      + [Move(s, False) for s in reversed(jv)])
        if surg.direction == "fwd":
            _check_segment(moves, pos, peak_seg)
            moves[pos:pos + 2] = valley_seg
        else:
            _check_segment(moves, pos, valley_seg)
            moves[pos:pos + len(valley_seg)] = peak_seg
        return
    if surg.op == "cell":
        side_u = [Move(u, True)] + [Move(s, True) for s in ju]
        side_v = [Move(v, True)] + [Move(s, True) for s in jv]
        if surg.movedir == "bwd":
            side_u = [m.flipped() for m in reversed(side_u)]
            side_v = [m.flipped() for m in reversed(side_v)]
        old, new = (side_u, side_v) if surg.direction == "fwd" else (side_v, side_u)
        _check_segment(moves, pos, old)
        moves[pos:pos + len(old)] = new
        return
    raise ReplayError(f"unknown surgery op {surg.op!r}")


def replay(cert, rules: RuleSet | None = None,
           cat: CellCatalog | None = None) -> ZigzagPath:
    """Replay every surgery; returns the final path.  Raises ReplayError with
    the index of the first failing surgery."""
    from .rules import builtin

    rules = rules if rules is not None else builtin(cert.ruleset)
    cat = cat if cat is not None else catalog(cert.ruleset)
    start = cert.source.start
    moves = list(cert.source.moves)
    for idx, surg in enumerate(cert.surgeries):
        try:
            _apply_surgery(start, moves, surg, rules, cat)
            ZigzagPath(start, tuple(moves))  # chaining check
        except (ReplayError, Exception) as exc:
            if not isinstance(exc, ReplayError):
                raise ReplayError(f"surgery {idx}: {exc}") from exc
            raise ReplayError(f"surgery {idx}: {exc}") from None
    final = ZigzagPath(start, tuple(moves))
    return final


def validate(cert, rules: RuleSet | None = None,
             cat: CellCatalog | None = None) -> bool:
    """True iff replaying the certificate's surgeries transforms its source
    into its target move for move."""
    try:
        final = replay(cert, rules, cat)
    except ReplayError:
        return False
    return final == cert.target
