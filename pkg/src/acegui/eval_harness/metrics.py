"""Outcome checks and success-rate reports."""

from __future__ import annotations

import json
import operator
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

from ..sim_desktop import EnvState, SymbolicRaster, panel_metadata, render_raster
from .tasks import CATEGORIES, CATEGORY_LABELS, Assertion, PixelSim, Predicate, RegionEq, TaskSpec

__all__ = ["MetricsReport", "check_goal", "format_table", "similarity"]

_MISSING = object()


def _full(r: SymbolicRaster) -> tuple[int, int, int, int]:
    return (0, 0, r.width, r.height)


def similarity(a: SymbolicRaster, b: SymbolicRaster, region: Sequence[int] | None = None) -> float:
    """Fraction of cells inside ``region`` (c0, r0, c1, r1) on which a and b agree."""
    if (a.width, a.height) != (b.width, b.height):
        raise ValueError(f"raster sizes differ: {a.width}x{a.height} vs {b.width}x{b.height}")
    c0, r0, c1, r1 = region if region is not None else _full(a)
    c0, r0 = max(c0, 0), max(r0, 0)
    c1, r1 = min(c1, a.width), min(r1, a.height)
    if c1 <= c0 or r1 <= r0:
        raise ValueError(f"empty comparison region {tuple(region)}")
    same = a.array[r0:r1, c0:c1] == b.array[r0:r1, c0:c1]
    return float(np.count_nonzero(same)) / same.size


def _lookup(state: EnvState, path: str) -> Any:
    root, _, rest = path.partition(".")
    if root == "settings":
        return state.settings.get(rest, _MISSING)
    node: Any = state.vfs
    for part in (p for p in rest.split("/") if p):
        if not isinstance(node, dict) or part not in node:
            return _MISSING
        node = node[part]
    return node


_CMP = {"==": operator.eq, "!=": operator.ne, ">=": operator.ge, "<=": operator.le}


def _holds(state: EnvState, a: Assertion) -> tuple[bool, str]:
    got = _lookup(state, a.path)
    if a.op == "exists":
        return got is not _MISSING, f"{a.path} exists"
    if a.op == "absent":
        return got is _MISSING, f"{a.path} absent"
    if got is _MISSING:
        return False, f"{a.path} missing"
    try:
        ok = bool(_CMP[a.op](got, a.value))
    except TypeError:
        ok = False
    return ok, f"{a.path}={got!r} {a.op} {a.value!r}"


def _metadata_region(state: EnvState, panel: str) -> tuple[int, int, int, int] | None:
    cp = state.cell_px
    for top in panel_metadata(state):
        for m in top.walk():
            if m.name == panel:
                x, y, w, h = m.bbox
                return (x // cp, y // cp, (x + w) // cp, (y + h) // cp)
    return None


def check_goal(final_state: EnvState, spec: TaskSpec) -> tuple[bool, str]:
    goal = spec.goal
    if isinstance(goal, Predicate):
        results = [_holds(final_state, a) for a in goal.assertions]
        failed = [d for ok, d in results if not ok]
        return (not failed, "all assertions hold" if not failed else "failed: " + "; ".join(failed))
    raster = render_raster(final_state)
    if isinstance(goal, PixelSim):
        sim = similarity(raster, goal.golden, goal.region)
        return sim >= spec.threshold, f"similarity {sim:.4f} vs threshold {spec.threshold}"
    if isinstance(goal, RegionEq):
        region = goal.region
        if goal.use_metadata_region:
            region = _metadata_region(final_state, goal.panel)
            if region is None:
                return False, f"panel {goal.panel!r} not on screen"
        sim = similarity(raster, goal.golden, region)
        return sim == 1.0, f"region {tuple(region) if region else 'full'} agreement {sim:.4f}"
    raise TypeError(f"unknown goal checker {type(goal).__name__}")


# ---- reports ----


@dataclass
class MetricsReport:
    label: str = "full"
    successes: dict[str, int] = field(default_factory=lambda: {c: 0 for c in CATEGORIES})
    totals: dict[str, int] = field(default_factory=lambda: {c: 0 for c in CATEGORIES})
    outcomes: dict[str, bool] = field(default_factory=dict)

    @classmethod
    def from_outcomes(cls, label: str, outcomes: Iterable[tuple[str, str, bool]]) -> "MetricsReport":
        rep = cls(label)
        for task_id, category, ok in outcomes:
            rep.totals[category] += 1
            rep.successes[category] += int(ok)
            rep.outcomes[task_id] = ok
        return rep

    def rate(self, category: str) -> float | None:
        n = self.totals[category]
        return 100.0 * self.successes[category] / n if n else None

    @property
    def total(self) -> int:
        return sum(self.totals.values())

    @property
    def overall(self) -> float | None:
        n = self.total
        return 100.0 * sum(self.successes.values()) / n if n else None

    @property
    def failed(self) -> list[str]:
        return sorted(t for t, ok in self.outcomes.items() if not ok)

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "rates": {c: self.rate(c) for c in CATEGORIES},
            "overall": self.overall,
            "successes": dict(self.successes),
            "totals": dict(self.totals),
            "outcomes": dict(sorted(self.outcomes.items())),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d) -> "MetricsReport":
        return cls(d["label"], dict(d["successes"]), dict(d["totals"]), dict(d["outcomes"]))


def _cell(v: float | None) -> str:
    return "-" if v is None else f"{v:.1f}"


def format_table(reports: Sequence[MetricsReport]) -> str:
    """Aligned text table, one row per configuration, success rates in %."""
    header = ["Method"] + [CATEGORY_LABELS[c] for c in CATEGORIES] + ["Overall"]
    rows = [[r.label] + [_cell(r.rate(c)) for c in CATEGORIES] + [_cell(r.overall)] for r in reports]
    widths = [max(len(row[i]) for row in [header] + rows) for i in range(len(header))]

    def line(cells):
        first = cells[0].ljust(widths[0])
        return " | ".join([first] + [c.rjust(w) for c, w in zip(cells[1:], widths[1:])])

    sep = "-+-".join("-" * w for w in widths)
    return "\n".join([line(header), sep] + [line(r) for r in rows])
