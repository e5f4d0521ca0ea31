"""Bundled fixture data: the critical-peak census and its identifiers."""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

from .diagram import Diagram, parse
from .peaks import PeakClass


@dataclass(frozen=True)
class PeakFixture:
    peak_id: str
    ruleset: str
    peak_class: PeakClass
    source: Diagram


def _load(text: str) -> list[PeakFixture]:
    out = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        pid, rset, cls, expr = line.split(None, 3)
        out.append(PeakFixture(pid, rset, PeakClass(cls), parse(expr)))
    return out


def load_peak_fixtures(path: str | None = None) -> list[PeakFixture]:
    if path is None:
        text = resources.files("mesdiag.data").joinpath("peak_fixtures.txt").read_text()
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    return _load(text)


def fixtures_for(ruleset: str, path: str | None = None) -> list[PeakFixture]:
    return [f for f in load_peak_fixtures(path) if f.ruleset == ruleset]


def fixture_id_of(source: Diagram, ruleset: str = "F") -> str | None:
    for f in fixtures_for(ruleset):
        if f.source == source:
            return f.peak_id
    return None
