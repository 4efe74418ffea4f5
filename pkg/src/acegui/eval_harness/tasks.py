"""Task definitions and task packs.

A pack is a directory::

    pack.json                 icon library and parser templates
    tasks/<category>/<name>.json
    goldens/<file>.json       golden rasters referenced by goal checkers

Task ids are ``<category dir>/<name>``, e.g. ``widget/volume_set``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Union

import jsonschema

from ..gui_parser import IconTemplate, load_templates
from ..sim_desktop import SymbolicRaster

__all__ = [
    "CATEGORIES",
    "CATEGORY_LABELS",
    "Assertion",
    "GoalChecker",
    "PackError",
    "PixelSim",
    "Predicate",
    "RegionEq",
    "TaskPack",
    "TaskSpec",
    "default_pack_path",
    "load_pack",
]

CATEGORIES = ("Design", "Office", "Widget", "SysSet", "FileMani")
CATEGORY_LABELS = {
    "Design": "Design",
    "Office": "Office",
    "Widget": "Widget",
    "SysSet": "Sys. Set.",
    "FileMani": "File Mani.",
}
DEFAULT_THRESHOLD = 0.95
DEFAULT_STEP_CAP = 60
PREDICATE_OPS = ("==", "!=", ">=", "<=", "exists", "absent")

Region = tuple[int, int, int, int]  # cells: c0, r0, c1, r1 (exclusive ends)


class PackError(ValueError):
    pass


@dataclass(frozen=True)
class PixelSim:
    golden: SymbolicRaster
    region: Region | None = None


@dataclass(frozen=True)
class RegionEq:
    golden: SymbolicRaster
    use_metadata_region: bool = True
    panel: str | None = None
    region: Region | None = None


@dataclass(frozen=True)
class Assertion:
    path: str  # "settings.<key>" or "vfs.<absolute path>"
    op: str
    value: Any = None

    def __post_init__(self) -> None:
        if self.op not in PREDICATE_OPS:
            raise ValueError(f"unknown predicate op {self.op!r}")
        root = self.path.partition(".")[0]
        if root not in ("settings", "vfs"):
            raise ValueError(f"assertion path must start with settings. or vfs., got {self.path!r}")


@dataclass(frozen=True)
class Predicate:
    assertions: tuple[Assertion, ...]


GoalChecker = Union[PixelSim, RegionEq, Predicate]


@dataclass
class TaskSpec:
    id: str
    category: str
    query: str
    transcript: str
    initial_state: dict
    goal: GoalChecker
    threshold: float = DEFAULT_THRESHOLD
    step_cap: int = DEFAULT_STEP_CAP
    golden: dict | None = field(default=None, repr=False)
    templates: tuple[IconTemplate, ...] = field(default=(), repr=False)

    def __post_init__(self) -> None:
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown category {self.category!r}")
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError("threshold must lie in [0, 1]")
        if self.step_cap < 1:
            raise ValueError("step_cap must be positive")


_REGION = {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 4, "maxItems": 4}
TASK_SCHEMA = {
    "type": "object",
    "required": ["category", "query", "transcript", "initial_state", "goal"],
    "additionalProperties": False,
    "properties": {
        "category": {"enum": list(CATEGORIES)},
        "query": {"type": "string", "minLength": 1},
        "transcript": {"type": "string", "minLength": 1},
        "threshold": {"type": "number", "minimum": 0, "maximum": 1},
        "step_cap": {"type": "integer", "minimum": 1},
        "initial_state": {"type": "object"},
        "golden": {"type": "object"},
        "goal": {
            "oneOf": [
                {
                    "type": "object",
                    "required": ["kind", "golden"],
                    "additionalProperties": False,
                    "properties": {"kind": {"const": "pixel_sim"}, "golden": {"type": "string"}, "region": _REGION},
                },
                {
                    "type": "object",
                    "required": ["kind", "golden"],
                    "additionalProperties": False,
                    "properties": {
                        "kind": {"const": "region_eq"},
                        "golden": {"type": "string"},
                        "use_metadata_region": {"type": "boolean"},
                        "panel": {"type": "string"},
                        "region": _REGION,
                    },
                },
                {
                    "type": "object",
                    "required": ["kind", "assertions"],
                    "additionalProperties": False,
                    "properties": {
                        "kind": {"const": "predicate"},
                        "assertions": {
                            "type": "array",
                            "minItems": 1,
                            "items": {
                                "type": "object",
                                "required": ["path", "op"],
                                "additionalProperties": False,
                                "properties": {
                                    "path": {"type": "string"},
                                    "op": {"enum": list(PREDICATE_OPS)},
                                    "value": {},
                                },
                            },
                        },
                    },
                },
            ]
        },
    },
}
PACK_SCHEMA = {
    "type": "object",
    "required": ["icons"],
    "properties": {
        "name": {"type": "string"},
        "icons": {"type": "object", "additionalProperties": {"type": "array", "items": {"type": "string"}}},
        "templates": {"type": "object", "additionalProperties": {"type": "array", "items": {"type": "string"}}},
    },
}


def _validate(instance, schema, where: str) -> None:
    errors = sorted(jsonschema.Draft202012Validator(schema).iter_errors(instance), key=lambda e: list(e.path))
    if errors:
        e = errors[0]
        loc = "/".join(str(p) for p in e.path)
        raise PackError(f"{where}: {loc or '<root>'}: {e.message}")


def _load_json(path: Path) -> Any:
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise PackError(f"{path}: {exc}") from None


@dataclass
class TaskPack:
    root: Path | None
    icons: dict[str, list[str]]
    templates: tuple[IconTemplate, ...]
    tasks: list[TaskSpec]

    def get(self, task_id: str) -> TaskSpec:
        for t in self.tasks:
            if t.id == task_id:
                return t
        raise KeyError(f"no task {task_id!r} in pack")

    def ids(self) -> list[str]:
        return [t.id for t in self.tasks]

    @classmethod
    def empty(cls) -> "TaskPack":
        return cls(None, {}, (), [])


def _goal(d: Mapping, root: Path, where: str, goldens: dict) -> GoalChecker:
    def golden(name: str) -> SymbolicRaster:
        if name not in goldens:
            path = root / "goldens" / name
            try:
                goldens[name] = SymbolicRaster.from_dict(_load_json(path))
            except (KeyError, TypeError, ValueError) as exc:
                raise PackError(f"{where}: bad golden raster {name}: {exc}") from None
        return goldens[name]

    region = tuple(d["region"]) if "region" in d else None
    if d["kind"] == "pixel_sim":
        return PixelSim(golden(d["golden"]), region)
    if d["kind"] == "region_eq":
        use_meta = d.get("use_metadata_region", True)
        if use_meta and "panel" not in d:
            raise PackError(f"{where}: region_eq with use_metadata_region needs a panel")
        return RegionEq(golden(d["golden"]), use_meta, d.get("panel"), region)
    return Predicate(tuple(Assertion(a["path"], a["op"], a.get("value")) for a in d["assertions"]))


def load_pack(path: str | Path | None = None) -> TaskPack:
    """Load and validate a task pack directory (default: the bundled pack)."""
    root = Path(path) if path is not None else default_pack_path()
    meta = _load_json(root / "pack.json")
    _validate(meta, PACK_SCHEMA, "pack.json")
    icons = meta["icons"]
    templates = tuple(load_templates(meta.get("templates", {})))
    goldens: dict[str, SymbolicRaster] = {}
    tasks = []
    for f in sorted((root / "tasks").glob("*/*.json")):
        task_id = f"{f.parent.name}/{f.stem}"
        d = _load_json(f)
        _validate(d, TASK_SCHEMA, task_id)
        state = dict(d["initial_state"])
        # the pack's icon library is shared by every task
        state["icons"] = {**icons, **state.get("icons", {})}
        tasks.append(TaskSpec(
            id=task_id,
            category=d["category"],
            query=d["query"],
            transcript=d["transcript"],
            initial_state=state,
            goal=_goal(d["goal"], root, task_id, goldens),
            threshold=d.get("threshold", DEFAULT_THRESHOLD),
            step_cap=d.get("step_cap", DEFAULT_STEP_CAP),
            golden=d.get("golden"),
            templates=templates,
        ))
    return TaskPack(root, icons, templates, tasks)


def default_pack_path() -> Path:
    return Path(str(resources.files("acegui") / "data" / "pack"))
