"""
Text renderings of diagrams: ASCII grids for quick inspection and a
standalone-compilable TikZ form.  Rendering never alters the diagram; the
grammar printer/parser pair carries the round-trip guarantee.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .diagram import GATE_IN, GATE_OUT, Diagram

# Fixed glyph table: one row of cell glyphs per gate kind, fixtures depend on
# these strings staying stable.
ASCII_GLYPHS = {
    "m": (">-<", " | "),
    "e": (" o ", " | "),
    "s": (" X ", "| |"),
}

TIKZ_MACROS = {
    "m": "\\gateM",
    "e": "\\gateE",
    "s": "\\gateS",
}


@dataclass(frozen=True)
class RenderOptions:
    fmt: str = "ascii"  # "ascii" | "tikz"
    spacing: int = 4  # horizontal cells per wire
    glyphs: dict = field(default_factory=lambda: dict(ASCII_GLYPHS))


def render_diagram(d: Diagram, options: RenderOptions | None = None) -> str:
    options = options or RenderOptions()
    if options.fmt == "ascii":
        return _render_ascii(d, options)
    if options.fmt == "tikz":
        return _render_tikz(d)
    raise ValueError(f"unknown format {options.fmt!r}")


def _wire_row(width: int, spacing: int) -> str:
    if width == 0:
        return "(no wires)"
    return "".join("|".center(spacing) for _ in range(width)).rstrip()


def _render_ascii(d: Diagram, options: RenderOptions) -> str:
    sp = options.spacing
    widths = d.widths()
    lines = [f"{d.inputs} -> {d.outputs}: {d.to_expr()}"]
    lines.append(_wire_row(d.inputs, sp))
    for k, (left, kind) in enumerate(d.slices):
        n_in, n_out = GATE_IN[kind], GATE_OUT[kind]
        w_in = widths[k]
        gate_cells = max(n_in, 1) * sp
        row = ""
        for i in range(left):
            row += "|".center(sp)
        glyph = options.glyphs[kind][0]
        row += glyph.center(gate_cells)
        for i in range(w_in - left - n_in):
            row += "|".center(sp)
        lines.append(row.rstrip())
        lines.append(_wire_row(widths[k + 1], sp))
    return "\n".join(lines) + "\n"


def _render_tikz(d: Diagram) -> str:
    widths = d.widths()
    rows = len(d.slices) + 1
    out = [
        "\\documentclass[tikz]{standalone}",
        "\\newcommand{\\gateM}[2]{\\node[fill=black,circle,inner sep=1.5pt] at (#1,#2) {};}",
        "\\newcommand{\\gateE}[2]{\\node[draw,circle,inner sep=1.2pt] at (#1,#2) {};}",
        "\\newcommand{\\gateS}[2]{\\node[draw,rectangle,inner sep=1.5pt] at (#1,#2) {};}",
        "\\begin{document}",
        "\\begin{tikzpicture}[yscale=-1]",
        f"% {d.to_expr()}",
    ]
    # wires, one segment per inter-slice gap
    for k in range(len(d.slices) + 1):
        w = widths[k]
        y0, y1 = k, k + 1
        for i in range(w):
            out.append(f"\\draw ({i},{y0}) -- ({i},{y1});")
    for k, (left, kind) in enumerate(d.slices):
        n_in = GATE_IN[kind]
        x = left + max(n_in - 1, 0) / 2
        out.append(f"{TIKZ_MACROS[kind]}{{{x}}}{{{k + 1}}}")
    out.append("\\end{tikzpicture}")
    out.append("\\end{document}")
    return "\n".join(out) + "\n"
