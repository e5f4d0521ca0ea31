"""
The catalog of four-cells: unoriented fillers between parallel rewriting paths.

Each critical peak contributes one cell whose boundary is its confluence
square: side A = the left peak step followed by the leftmost normalization of
its reduct, side B the same on the right.  The five coherence peaks carry the
axiom names (penta, tria, inv, g, exa2); foldable peaks are the "fold(...)"
cells (the paper's circled-dot fillers), and Kelly / weak-Kelly peaks keep
their census identifiers.  Two parametric plumbing cells complete the
vocabulary: disjoint_square (two non-overlapping redexes commute) and
stale_cancel (a step undone by its formal inverse).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

from .diagram import Diagram
from .fixtures import fixtures_for
from .peaks import CriticalPeak, PeakClass, classify, enumerate_peaks, join
from .rewrite import RewriteStep
from .rules import RuleSet, M_RULES, F_RULES

BASE_CELLS = ("penta", "tria", "inv", "g", "exa2")
PLUMBING_CELLS = ("disjoint_square", "stale_cancel")

_COHERENCE_NAMES = {"coh1": "penta", "coh2": "tria", "coh3": "inv",
                    "coh4": "g", "coh5": "exa2"}


@dataclass(frozen=True)
class FourCell:
    name: str
    peak_id: str
    peak_class: PeakClass
    source: Diagram
    left_key: tuple  # (rule name, gates) of the side-A peak step
    right_key: tuple
    side_a: tuple[RewriteStep, ...]  # full side: peak step then join steps
    side_b: tuple[RewriteStep, ...]
    target: Diagram

    def sides(self) -> tuple[tuple[RewriteStep, ...], tuple[RewriteStep, ...]]:
        return (self.side_a, self.side_b)

    def is_plumbing(self) -> bool:
        return self.name in PLUMBING_CELLS

    def __str__(self) -> str:
        return f"{self.name}: {self.source.to_expr()} => {self.target.to_expr()}"


def cell_vocabulary_class(name: str) -> str:
    """Coarse grouping used by the closure checks: base, fold, kelly,
    weak_kelly or plumbing."""
    if name in BASE_CELLS:
        return "base"
    if name in PLUMBING_CELLS:
        return "plumbing"
    for prefix in ("fold", "kelly", "weak_kelly"):
        if name.startswith(prefix + "("):
            return prefix
    raise ValueError(f"unknown cell name {name!r}")


def _cell_name(peak_id: str, cls: PeakClass) -> str:
    if peak_id in _COHERENCE_NAMES:
        return _COHERENCE_NAMES[peak_id]
    if cls in (PeakClass.SIMPLY_FOLDABLE, PeakClass.STRONGLY_FOLDABLE):
        return f"fold({peak_id})"
    if cls is PeakClass.KELLY:
        return f"kelly({peak_id})"
    if cls is PeakClass.WEAK_KELLY:
        return f"weak_kelly({peak_id})"
    raise ValueError(peak_id)


class CellCatalog:
    """All peak cells of a rule set, indexed by name and by rule pair."""

    def __init__(self, rules: RuleSet):
        self.rules = rules
        self.cells: dict[str, FourCell] = {}
        self.by_rule_pair: dict[frozenset, list[FourCell]] = {}
        fixture_ids = {f.source: f.peak_id for f in fixtures_for("F")}
        for peak in enumerate_peaks(rules):
            jr = join(peak, rules)
            cls = classify(peak, jr, rules)
            pid = fixture_ids.get(peak.source)
            if pid is None:
                pid = f"x({peak.source.to_expr()})"
            cell = FourCell(
                name=_cell_name(pid, cls),
                peak_id=pid,
                peak_class=cls,
                source=peak.source,
                left_key=(peak.left.rule.name, peak.left.gates),
                right_key=(peak.right.rule.name, peak.right.gates),
                side_a=tuple(jr.left_path.steps),
                side_b=tuple(jr.right_path.steps),
                target=jr.meet,
            )
            self.cells[cell.name] = cell
            pair = frozenset((cell.left_key[0], cell.right_key[0]))
            self.by_rule_pair.setdefault(pair, []).append(cell)

    def __getitem__(self, name: str) -> FourCell:
        return self.cells[name]

    def __contains__(self, name: str) -> bool:
        return name in self.cells

    def candidates(self, rule_a: str, rule_b: str) -> list[FourCell]:
        return self.by_rule_pair.get(frozenset((rule_a, rule_b)), [])


@lru_cache(maxsize=None)
def catalog(ruleset_name: str) -> CellCatalog:
    if ruleset_name == "M":
        return CellCatalog(M_RULES)
    if ruleset_name == "F":
        return CellCatalog(F_RULES)
    raise KeyError(f"no cell catalog for rule set {ruleset_name!r}")
