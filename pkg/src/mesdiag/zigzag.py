"""
Zigzag rewriting paths: sequences of rule steps traversed forward or backward.

A move (step, True) walks step.source -> step.target; (step, False) walks the
same step the other way.  Zigzags model composites of the invertible
isomorphisms: every rule application can be undone formally.
"""

from __future__ import annotations

from dataclasses import dataclass

from .diagram import Diagram, DiagramError
from .rewrite import RewriteStep


@dataclass(frozen=True)
class Move:
    step: RewriteStep
    forward: bool

    @property
    def src(self) -> Diagram:
        return self.step.source if self.forward else self.step.target

    @property
    def dst(self) -> Diagram:
        return self.step.target if self.forward else self.step.source

    def flipped(self) -> "Move":
        return Move(self.step, not self.forward)

    def __str__(self) -> str:
        sign = "+" if self.forward else "-"
        return f"{sign}{self.step.rule.name}@{','.join(map(str, self.step.gates))}"


@dataclass(frozen=True)
class ZigzagPath:
    start: Diagram
    moves: tuple[Move, ...]

    def __post_init__(self):
        at = self.start
        for mv in self.moves:
            if mv.src != at:
                raise DiagramError(f"zigzag does not chain at {mv}")
            at = mv.dst

    @property
    def end(self) -> Diagram:
        return self.moves[-1].dst if self.moves else self.start

    def diagrams(self) -> list[Diagram]:
        out = [self.start]
        for mv in self.moves:
            out.append(mv.dst)
        return out

    def reversed(self) -> "ZigzagPath":
        return ZigzagPath(self.end, tuple(m.flipped() for m in reversed(self.moves)))

    def then(self, other: "ZigzagPath") -> "ZigzagPath":
        if other.start != self.end:
            raise DiagramError("cannot concatenate zigzags")
        return ZigzagPath(self.start, self.moves + other.moves)

    def __len__(self):
        return len(self.moves)

    def __str__(self) -> str:
        body = " ".join(str(m) for m in self.moves)
        return f"{self.start.to_expr()} : {body}" if body else f"{self.start.to_expr()} :"


def forward_zigzag(start: Diagram, steps) -> ZigzagPath:
    return ZigzagPath(start, tuple(Move(s, True) for s in steps))
