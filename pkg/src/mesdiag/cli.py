"""
Command line entry point.

    mesdiag normalize --rules F "s;s"
    mesdiag equal "<expr>" "<expr>"
    mesdiag termination-check --rules F
    mesdiag critical-peaks --rules F [--bound 4] [--fixtures FILE]
    mesdiag confluence --rules GM
    mesdiag certify --terms polygon.txt [--expand]
    mesdiag expand-kelly kel1
    mesdiag render --format ascii "<expr>"

Exit codes: 0 success, 1 verification failure, 2 input error.
"""

from __future__ import annotations

import argparse
import os
import sys

from .diagram import DiagramError, parse
from .fixtures import fixtures_for
from .interpret import DEFAULT_INTERPRETATION, parse_interpretation, verify_termination
from .peaks import PeakClass, local_confluence_report
from .render import RenderOptions, render_diagram
from .rewrite import BudgetExhausted, normalize
from .rules import builtin, parse_rule_file
from .terms import TermError, mor_to_zigzag, parse_mor, parse_term, term_to_diagram


def _ruleset(args):
    if getattr(args, "rule_file", None):
        with open(args.rule_file, encoding="utf-8") as fh:
            return parse_rule_file(fh.read())
    return builtin(args.rules)


def _budget(args):
    env = os.environ.get("SMC_STEP_BUDGET")
    if getattr(args, "budget", None) is not None:
        return args.budget
    return int(env) if env else None


def cmd_normalize(args) -> int:
    rules = _ruleset(args)
    d = parse(args.expr)
    try:
        nf, path = normalize(d, rules, strategy=args.strategy, seed=args.seed,
                             budget=_budget(args))
    except BudgetExhausted as exc:
        print(f"budget exhausted: {exc}")
        return 1
    print(nf.to_expr())
    if path.steps:
        print("path:", " . ".join(str(s) for s in path))
    else:
        print("path: (empty)")
    return 0


def cmd_equal(args) -> int:
    a, b = parse(args.left), parse(args.right)
    print("equal" if a == b else "distinct")
    return 0 if a == b else 1


def cmd_termination(args) -> int:
    rules = _ruleset(args)
    interp = DEFAULT_INTERPRETATION
    if args.interpretation:
        with open(args.interpretation, encoding="utf-8") as fh:
            interp = parse_interpretation(fh.read())
    report = verify_termination(rules, interp)
    print(report.render())
    return 0 if report.terminating else 1


def cmd_peaks(args) -> int:
    rules = _ruleset(args)
    report = local_confluence_report(rules, bound=args.bound, budget=_budget(args))
    print(report.render())
    if args.fixtures:
        wanted = ({f.source for f in fixtures_for(rules.name, args.fixtures)}
                  if rules.name in ("M", "F") else set())
        found = {r.peak.source for r in report.reports}
        missing = wanted - found
        if missing:
            print("MISSING fixtures:", "; ".join(s.to_expr() for s in sorted(
                missing, key=lambda d: d.to_expr())))
            return 1
        print(f"all {len(wanted)} fixture sources found")
    return 0 if report.confluent else 1


def cmd_confluence(args) -> int:
    rules = _ruleset(args)
    report = local_confluence_report(rules, bound=args.bound, budget=_budget(args) or 1000)
    counts = report.counts()
    summary = ", ".join(f"{counts[c]} {c.value}" for c in PeakClass if counts[c])
    print(f"{len(report.reports)} peaks, {summary}")
    if report.confluent:
        print("locally confluent")
        return 0
    for r in report.reports:
        if r.join is None:
            print(f"NOT JOINABLE: {r.peak.source.to_expr()} [{r.peak.left} | {r.peak.right}]")
    return 1


def _read_polygon(path: str):
    objects: dict[str, object] = {}
    edges = []
    terminal = None
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            head, _, body = line.partition(" ")
            if head == "OBJECT":
                name, _, term = body.partition(":")
                objects[name.strip()] = parse_term(term.strip())
            elif head == "EDGE":
                name, _, rest = body.partition(":")
                route, _, expr = rest.partition(":")
                src, _, dst = route.partition("->")
                edges.append((name.strip(), src.strip(), dst.strip(),
                              parse_mor(expr.strip())))
            elif head == "TERMINAL":
                terminal = body.strip()
            else:
                raise TermError(f"bad polygon line {line!r}")
    if terminal is None or terminal not in objects:
        raise TermError("polygon needs a TERMINAL line naming an object")
    return objects, edges, terminal


def cmd_certify(args) -> int:
    from .certify import Certifier, NotParallel
    from .expansions import expand_certificate
    from .replay import validate

    rules = builtin(args.rules)
    objects, edges, terminal = _read_polygon(args.terms)
    order = args.order.split(",") if args.order else [
        v for v in objects[terminal].variables()]
    outgoing: dict[str, list] = {}
    incoming: dict[str, int] = {name: 0 for name in objects}
    for name, src, dst, expr in edges:
        outgoing.setdefault(src, []).append((name, dst, expr))
        incoming[dst] += 1
    starts = [n for n in objects if incoming[n] == 0]
    if len(starts) != 1:
        print(f"polygon must have exactly one initial object, found {starts}")
        return 2
    paths = []

    def walk(node, acc):
        if node == terminal:
            paths.append(list(acc))
            return
        for name, dst, expr in outgoing.get(node, []):
            walk(dst, acc + [expr])

    walk(starts[0], [])
    if len(paths) != 2:
        print(f"polygon must have exactly two sides, found {len(paths)}")
        return 2

    def compose(exprs):
        from .terms import MorExpr
        out = exprs[0]
        for e in exprs[1:]:
            out = MorExpr("comp", left=out, right=e)
        out.check()
        return out

    z1 = mor_to_zigzag(compose(paths[0]), order, rules)
    z2 = mor_to_zigzag(compose(paths[1]), order, rules)
    try:
        cert = Certifier(rules).certify(z1, z2)
    except NotParallel as exc:
        print(f"not parallel: {exc}")
        return 2
    if args.expand:
        cert = expand_certificate(cert)
    ok = validate(cert)
    text = cert.render()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        print(text, end="")
    print(f"# validate: {'ok' if ok else 'FAILED'}", file=sys.stderr)
    return 0 if ok else 1


def cmd_expand_kelly(args) -> int:
    from .expansions import UnknownPeak, expand_kelly

    try:
        seq = expand_kelly(args.peak)
    except UnknownPeak as exc:
        print(exc)
        return 2
    for s in seq:
        print(s.line())
    return 0


def cmd_render(args) -> int:
    d = parse(args.expr)
    print(render_diagram(d, RenderOptions(fmt=args.format)), end="")
    return 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="mesdiag", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="cmd", required=True)

    def common(p, rules=True):
        if rules:
            p.add_argument("--rules", default="F", help="M, F or GM")
            p.add_argument("--rule-file", help="custom rule file")
        p.add_argument("--budget", type=int, default=None)

    p = sub.add_parser("normalize")
    common(p)
    p.add_argument("--strategy", default="leftmost", choices=["leftmost", "random"])
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("expr")
    p.set_defaults(fn=cmd_normalize)

    p = sub.add_parser("equal")
    p.add_argument("left")
    p.add_argument("right")
    p.set_defaults(fn=cmd_equal)

    p = sub.add_parser("termination-check")
    common(p)
    p.add_argument("--interpretation", help="gate table file, e.g. 'm: 2x+y'")
    p.set_defaults(fn=cmd_termination)

    p = sub.add_parser("critical-peaks")
    common(p)
    p.add_argument("--bound", type=int, default=4)
    p.add_argument("--fixtures", nargs="?", const=None, default=None,
                   help="fixture file to check containment against")
    p.set_defaults(fn=cmd_peaks)

    p = sub.add_parser("confluence")
    common(p)
    p.add_argument("--bound", type=int, default=4)
    p.set_defaults(fn=cmd_confluence)

    p = sub.add_parser("certify")
    p.add_argument("--rules", default="F", help="M or F")
    p.add_argument("--terms", required=True, help="polygon file")
    p.add_argument("--order", help="comma-separated variable order")
    p.add_argument("--expand", action="store_true",
                   help="expand kelly cells into base vocabulary")
    p.add_argument("--out", help="write the certificate here")
    p.set_defaults(fn=cmd_certify)

    p = sub.add_parser("expand-kelly")
    p.add_argument("peak", help="peak id, e.g. kel1 or wk05")
    p.set_defaults(fn=cmd_expand_kelly)

    p = sub.add_parser("render")
    p.add_argument("--format", default="ascii", choices=["ascii", "tikz"])
    p.add_argument("expr")
    p.set_defaults(fn=cmd_render)

    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except (DiagramError, TermError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
