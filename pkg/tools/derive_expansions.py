#!/usr/bin/env python3
"""Derive the expansion table and freeze it into the package data.

Entries are built in dependency order: each derivation may only use base
cells, foldable cells, plumbing, and entries already built, so the shipped
table is well founded.  Run from the repository root:

    python3 tools/derive_expansions.py [--check]
"""

import argparse
import pathlib
import sys
import time

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from mesdiag.cells import catalog
from mesdiag.expansions import (
    ALL_ENTRY_IDS,
    ExpansionError,
    build_entry,
    load_expansion_table,
    render_expansion_table,
)
from mesdiag.rules import F_RULES


def kelly_name(cat, pid):
    for cell in cat.cells.values():
        if cell.peak_id == pid:
            return cell.name
    raise KeyError(pid)


def derive_all():
    cat = catalog("F")
    names = {pid: kelly_name(cat, pid) for pid in ALL_ENTRY_IDS}
    table = {}
    order = []
    pending = list(ALL_ENTRY_IDS)
    while pending:
        progress = False
        for pid in list(pending):
            unbuilt = frozenset(names[q] for q in pending)
            t0 = time.time()
            try:
                seq = build_entry(pid, F_RULES, cat, forbidden=unbuilt)
            except ExpansionError as exc:
                print(f"  {pid}: deferred ({str(exc)[:60]})")
                continue
            table[pid] = seq
            order.append(pid)
            pending.remove(pid)
            progress = True
            used = sorted({s.cell for s in seq
                           if s.cell not in ("disjoint_square", "stale_cancel")})
            print(f"  {pid}: {len(seq)} surgeries via {used}  ({time.time()-t0:.1f}s)")
        if not progress:
            raise SystemExit(f"no dependency order covers: {pending}")
    print("build order:", " ".join(order))
    return table


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--check", action="store_true",
                    help="compare against the shipped table instead of writing")
    args = ap.parse_args()
    table = derive_all()
    text = render_expansion_table(table)
    out = pathlib.Path(__file__).resolve().parents[1] / "src" / "mesdiag" / "data" / "expansions.txt"
    if args.check:
        shipped = load_expansion_table()
        fresh = {pid: [s.line() for s in seq] for pid, seq in table.items()}
        old = {pid: [s.line() for s in seq] for pid, seq in shipped.items()}
        print("match:", fresh == old)
    else:
        out.write_text(text)
        print(f"wrote {out} ({len(text.splitlines())} lines)")


if __name__ == "__main__":
    main()
