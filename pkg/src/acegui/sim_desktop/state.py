"""Environment state: widget trees, settings, virtual file system.

Everything here is plain data. :class:`EnvState` serializes to a canonical
JSON document (sorted keys), and its hash is the sha256 of that document.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from typing import Any, Iterator, Mapping

import jsonschema

WIDGET_KINDS = (
    "window", "panel", "button", "text_field", "checkbox", "menu_item",
    "scroll_area", "icon", "label", "canvas",
)
TRIGGERS = ("click", "double_click", "right_click", "toggle", "text_commit", "drag_drop")

# op name -> (required args, optional args); args named "widget"/"window" must
# reference an existing widget id.
EFFECT_OPS: dict[str, tuple[tuple[str, ...], tuple[str, ...]]] = {
    "set_setting": (("key", "value"), ()),
    "add_setting": (("key", "delta"), ("min", "max")),
    "set_setting_from_text": (("key",), ("widget",)),
    "set_setting_from_state": (("key", "state_key"), ("widget",)),
    "open_window": (("window",), ()),
    "close_window": (("window",), ()),
    "set_text": (("text",), ("widget",)),
    "set_text_from_setting": (("key",), ("widget", "fmt")),
    "set_state": (("key", "value"), ("widget",)),
    "toggle_state": (("key",), ("widget",)),
    "show": ((), ("widget",)),
    "hide": ((), ("widget",)),
    "move_file": (("src", "dst"), ()),
    "delete_file": (("path",), ()),
    "create_folder": (("path",), ()),
    "add_keyframe": ((), ("widget",)),
}

DEFAULT_CELL_PX = 8
DOUBLE_CLICK_MS = 500
TICK_MS = 100


class SchemaError(ValueError):
    """A task or state document does not match the schema.

    ``path`` locates the offending field, e.g.
    ``initial_state.windows[0].children[1].icon_id``.
    """

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.message = message


@dataclass
class Effect:
    trigger: str
    op: str
    args: dict[str, Any] = field(default_factory=dict)
    # drag_drop only: fires when dropped on this widget (or a descendant of it)
    target: str | None = None

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"trigger": self.trigger, "op": self.op, "args": dict(self.args)}
        if self.target is not None:
            d["target"] = self.target
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "Effect":
        return cls(d["trigger"], d["op"], dict(d.get("args", {})), d.get("target"))


@dataclass
class Widget:
    id: str
    kind: str
    bbox: tuple[int, int, int, int]
    text: str = ""
    icon_id: str | None = None
    state: dict[str, Any] = field(default_factory=dict)
    effects: list[Effect] = field(default_factory=list)
    children: list["Widget"] = field(default_factory=list)

    @property
    def visible(self) -> bool:
        return bool(self.state.get("visible", True))

    def walk(self) -> Iterator["Widget"]:
        yield self
        for child in self.children:
            yield from child.walk()

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"id": self.id, "kind": self.kind, "bbox": list(self.bbox)}
        if self.text:
            d["text"] = self.text
        if self.icon_id is not None:
            d["icon_id"] = self.icon_id
        if self.state:
            d["state"] = dict(self.state)
        if self.effects:
            d["effects"] = [e.to_dict() for e in self.effects]
        if self.children:
            d["children"] = [c.to_dict() for c in self.children]
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "Widget":
        return cls(
            id=d["id"],
            kind=d["kind"],
            bbox=tuple(d["bbox"]),
            text=d.get("text", ""),
            icon_id=d.get("icon_id"),
            state=dict(d.get("state", {})),
            effects=[Effect.from_dict(e) for e in d.get("effects", [])],
            children=[Widget.from_dict(c) for c in d.get("children", [])],
        )


@dataclass
class EnvState:
    screen: tuple[int, int]
    windows: list[Widget] = field(default_factory=list)  # z-order, last is topmost
    settings: dict[str, Any] = field(default_factory=dict)
    vfs: dict[str, Any] = field(default_factory=dict)  # folders are dicts, files are strings
    icons: dict[str, tuple[str, ...]] = field(default_factory=dict)
    bindings: dict[str, list[Effect]] = field(default_factory=dict)
    cursor: tuple[int, int] = (0, 0)
    focus: str | None = None
    pressed_keys: frozenset[str] = frozenset()
    mouse_down: bool = False
    cell_px: int = DEFAULT_CELL_PX
    tick: int = 0
    last_click: tuple[int, str] | None = None
    drag: tuple[str | None, int, int] | None = None

    def copy(self) -> "EnvState":
        return copy.deepcopy(self)

    def widgets(self) -> Iterator[Widget]:
        for w in self.windows:
            yield from w.walk()

    def find(self, widget_id: str) -> Widget | None:
        for w in self.widgets():
            if w.id == widget_id:
                return w
        return None

    def to_dict(self) -> dict:
        return {
            "screen": list(self.screen),
            "cell_px": self.cell_px,
            "windows": [w.to_dict() for w in self.windows],
            "settings": dict(self.settings),
            "vfs": copy.deepcopy(self.vfs),
            "icons": {k: list(v) for k, v in self.icons.items()},
            "bindings": {k: [e.to_dict() for e in v] for k, v in self.bindings.items()},
            "cursor": list(self.cursor),
            "focus": self.focus,
            "pressed_keys": sorted(self.pressed_keys),
            "mouse_down": self.mouse_down,
            "tick": self.tick,
            "last_click": list(self.last_click) if self.last_click else None,
            "drag": list(self.drag) if self.drag else None,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"), ensure_ascii=False)

    def state_hash(self) -> str:
        return hashlib.sha256(self.to_json().encode("utf-8")).hexdigest()

    @classmethod
    def from_dict(cls, d: Mapping, path: str = "state") -> "EnvState":
        """Build a validated state; raises :class:`SchemaError` on bad input."""
        _validate_schema(d, path)
        state = cls(
            screen=tuple(d["screen"]),
            cell_px=d.get("cell_px", DEFAULT_CELL_PX),
            windows=[Widget.from_dict(w) for w in d.get("windows", [])],
            settings=dict(d.get("settings", {})),
            vfs=copy.deepcopy(dict(d.get("vfs", {}))),
            icons={k: tuple(v) for k, v in d.get("icons", {}).items()},
            bindings={k: [Effect.from_dict(e) for e in v] for k, v in d.get("bindings", {}).items()},
            cursor=tuple(d.get("cursor", (0, 0))),
            focus=d.get("focus"),
            pressed_keys=frozenset(d.get("pressed_keys", ())),
            mouse_down=d.get("mouse_down", False),
            tick=d.get("tick", 0),
            last_click=tuple(d["last_click"]) if d.get("last_click") else None,
            drag=tuple(d["drag"]) if d.get("drag") else None,
        )
        _check_semantics(state, path)
        return state

    @classmethod
    def from_json(cls, text: str) -> "EnvState":
        return cls.from_dict(json.loads(text))


# ---- schema ----

_SCALAR = {"type": ["string", "number", "boolean", "null"]}
_BBOX = {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 4, "maxItems": 4}
_EFFECT = {
    "type": "object",
    "required": ["trigger", "op"],
    "additionalProperties": False,
    "properties": {
        "trigger": {"enum": list(TRIGGERS)},
        "op": {"enum": sorted(EFFECT_OPS)},
        "args": {"type": "object", "additionalProperties": _SCALAR},
        "target": {"type": "string"},
    },
}

STATE_SCHEMA: dict = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["screen"],
    "additionalProperties": False,
    "$defs": {
        "widget": {
            "type": "object",
            "required": ["id", "kind", "bbox"],
            "additionalProperties": False,
            "properties": {
                "id": {"type": "string", "minLength": 1},
                "kind": {"enum": list(WIDGET_KINDS)},
                "bbox": _BBOX,
                "text": {"type": "string"},
                "icon_id": {"type": "string"},
                "state": {"type": "object", "additionalProperties": _SCALAR},
                "effects": {"type": "array", "items": _EFFECT},
                "children": {"type": "array", "items": {"$ref": "#/$defs/widget"}},
            },
        },
        "folder": {
            "type": "object",
            "additionalProperties": {"anyOf": [{"type": "string"}, {"$ref": "#/$defs/folder"}]},
        },
    },
    "properties": {
        "screen": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 2, "maxItems": 2},
        "cell_px": {"type": "integer", "minimum": 1},
        "windows": {"type": "array", "items": {"$ref": "#/$defs/widget"}},
        "settings": {"type": "object", "additionalProperties": _SCALAR},
        "vfs": {"$ref": "#/$defs/folder"},
        "icons": {
            "type": "object",
            "additionalProperties": {
                "type": "array", "minItems": 1,
                "items": {"type": "string", "minLength": 1, "pattern": "^[^ ]+$"},
            },
        },
        "bindings": {"type": "object", "additionalProperties": {"type": "array", "items": _EFFECT}},
        "cursor": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 2, "maxItems": 2},
        "focus": {"type": ["string", "null"]},
        "pressed_keys": {"type": "array", "items": {"type": "string"}},
        "mouse_down": {"type": "boolean"},
        "tick": {"type": "integer", "minimum": 0},
        "last_click": {"type": ["array", "null"]},
        "drag": {"type": ["array", "null"]},
    },
}
_VALIDATOR = jsonschema.Draft202012Validator(STATE_SCHEMA)


def _json_path(base: str, parts) -> str:
    out = base
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else f".{p}"
    return out


def _validate_schema(d: Mapping, path: str) -> None:
    errors = sorted(_VALIDATOR.iter_errors(d), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        err = errors[0]
        raise SchemaError(_json_path(path, err.absolute_path), err.message)


def _check_semantics(state: EnvState, path: str) -> None:
    cp = state.cell_px
    sw, sh = state.screen
    if sw % cp or sh % cp:
        raise SchemaError(f"{path}.screen", f"screen size must be a multiple of cell_px={cp}")
    x, y = state.cursor
    if not (x < sw and y < sh):
        raise SchemaError(f"{path}.cursor", "cursor outside the screen")

    for name, rows in state.icons.items():
        if len({len(r) for r in rows}) != 1:
            raise SchemaError(f"{path}.icons.{name}", "icon pattern rows must have equal length")

    ids: dict[str, str] = {}

    def check_widget(w: Widget, wpath: str, parent: Widget | None) -> None:
        if w.id in ids:
            raise SchemaError(f"{wpath}.id", f"duplicate widget id {w.id!r} (first at {ids[w.id]})")
        ids[w.id] = wpath
        bx, by, bw, bh = w.bbox
        if bw <= 0 or bh <= 0:
            raise SchemaError(f"{wpath}.bbox", "width and height must be positive")
        if any(v % cp for v in w.bbox):
            raise SchemaError(f"{wpath}.bbox", f"bbox must snap to {cp}px cells")
        if parent is None:
            if w.kind != "window":
                raise SchemaError(f"{wpath}.kind", "top-level widgets must be windows")
            if bx + bw > sw or by + bh > sh:
                raise SchemaError(f"{wpath}.bbox", "window extends past the screen")
        else:
            px, py, pw, ph = parent.bbox
            extra = int(parent.state.get("max_offset", 0)) if parent.kind == "scroll_area" else 0
            if not (bx >= px and by >= py and bx + bw <= px + pw and by + bh <= py + ph + extra):
                raise SchemaError(f"{wpath}.bbox", f"child bbox lies outside parent {parent.id!r}")
        if w.kind == "window" and parent is not None:
            raise SchemaError(f"{wpath}.kind", "windows cannot be nested")
        if w.icon_id is not None and w.icon_id not in state.icons:
            raise SchemaError(f"{wpath}.icon_id", f"unknown icon_id {w.icon_id!r}")
        if w.kind == "scroll_area":
            max_off = w.state.get("max_offset", 0)
            off = w.state.get("scroll_offset", 0)
            if not isinstance(max_off, int) or max_off < 0 or max_off % cp:
                raise SchemaError(f"{wpath}.state.max_offset", "must be a non-negative multiple of cell_px")
            if not isinstance(off, int) or not 0 <= off <= max_off or off % cp:
                raise SchemaError(f"{wpath}.state.scroll_offset", "must lie in [0, max_offset] on the cell grid")
        for i, c in enumerate(w.children):
            check_widget(c, f"{wpath}.children[{i}]", w)

    for i, w in enumerate(state.windows):
        check_widget(w, f"{path}.windows[{i}]", None)

    def check_effects(effects: list[Effect], epath: str) -> None:
        for i, e in enumerate(effects):
            required, optional = EFFECT_OPS[e.op]
            missing = [a for a in required if a not in e.args]
            if missing:
                raise SchemaError(f"{epath}[{i}].args", f"{e.op} requires {missing[0]!r}")
            extra = [a for a in e.args if a not in required and a not in optional]
            if extra:
                raise SchemaError(f"{epath}[{i}].args.{extra[0]}", f"{e.op} does not take {extra[0]!r}")
            for ref in ("widget", "window"):
                if ref in e.args and e.args[ref] not in ids:
                    raise SchemaError(f"{epath}[{i}].args.{ref}", f"unknown widget {e.args[ref]!r}")
            if e.target is not None and e.target not in ids:
                raise SchemaError(f"{epath}[{i}].target", f"unknown widget {e.target!r}")

    for wid, wpath in ids.items():
        w = state.find(wid)
        check_effects(w.effects, f"{wpath}.effects")
    for combo, effects in state.bindings.items():
        check_effects(effects, f"{path}.bindings.{combo}")
    if state.focus is not None and state.focus not in ids:
        raise SchemaError(f"{path}.focus", f"unknown widget {state.focus!r}")
