"""Action execution against an :class:`EnvState`.

``execute`` is a pure transition: it copies the state, dispatches every
action in order and returns the new state with a per-action report.

Routing conventions:

* pointer actions hit the topmost visible window containing the point and
  descend to the deepest visible child;
* ``write`` goes to the focused text field, otherwise it is dropped;
* ``press``/``hotkey`` go to the focused text field if it handles the
  combination, otherwise to the global key bindings;
* two clicks on the same widget within ``DOUBLE_CLICK_MS`` of logical time
  (one tick per action) fire ``double_click`` effects;
* text fields commit (``text_commit``) on ``enter`` or on focus loss; when a
  click moves focus, the old field commits before the click is handled.
"""

from __future__ import annotations

from dataclasses import dataclass

from .. import action_dsl as dsl
from .state import DOUBLE_CLICK_MS, TICK_MS, Effect, EnvState, Widget

MODIFIERS = ("ctrl", "alt", "shift")


class OutOfBoundsError(ValueError):
    def __init__(self, violations):
        first = violations[0]
        super().__init__(f"action {first.index} targets ({first.x}, {first.y}) outside the screen")
        self.violations = violations


@dataclass(frozen=True)
class ExecReport:
    results: tuple[str, ...]
    tick: int
    state_hash: str

    def to_dict(self) -> dict:
        return {"results": list(self.results), "tick": self.tick, "state_hash": self.state_hash}

    @classmethod
    def from_dict(cls, d) -> "ExecReport":
        return cls(tuple(d["results"]), d["tick"], d["state_hash"])


def normalize_combo(keys) -> str:
    keys = [k.lower() for k in keys]
    mods = [m for m in MODIFIERS if m in keys]
    rest = [k for k in keys if k not in MODIFIERS]
    return "+".join(mods + rest)


def _contains(bbox, x: int, y: int) -> bool:
    bx, by, bw, bh = bbox
    return bx <= x < bx + bw and by <= y < by + bh


def _vfs_split(path: str) -> list[str]:
    return [p for p in path.split("/") if p]


class _Machine:
    def __init__(self, state: EnvState):
        self.s = state
        self.by_id: dict[str, Widget] = {}
        self.parent: dict[str, str | None] = {}
        for win in state.windows:
            self._index(win, None)

    def _index(self, w: Widget, parent: str | None) -> None:
        self.by_id[w.id] = w
        self.parent[w.id] = parent
        for c in w.children:
            self._index(c, w.id)

    def ancestors(self, wid: str | None):
        while wid is not None:
            yield wid
            wid = self.parent[wid]

    def window_of(self, wid: str) -> str:
        return list(self.ancestors(wid))[-1]

    def shown(self, wid: str) -> bool:
        return all(self.by_id[a].visible for a in self.ancestors(wid))

    # ---- hit testing ----

    def hit(self, x: int, y: int) -> tuple[Widget | None, int]:
        """Deepest visible widget at (x, y) and y in that widget's content coordinates."""
        for win in reversed(self.s.windows):
            if win.visible and _contains(win.bbox, x, y):
                return self._descend(win, x, y)
        return None, y

    def _descend(self, w: Widget, x: int, y: int) -> tuple[Widget, int]:
        if w.kind == "scroll_area":
            bx, by, bw, bh = w.bbox
            if w.state.get("max_offset") and x >= bx + bw - self.s.cell_px:
                return w, y
            y = y + int(w.state.get("scroll_offset", 0))
        for child in reversed(w.children):
            if child.visible and _contains(child.bbox, x, y):
                return self._descend(child, x, y)
        return w, y

    # ---- effects ----

    def fire(self, w: Widget, trigger: str, drop_target: Widget | None = None) -> list[str]:
        done = []
        for e in list(w.effects):
            if e.trigger != trigger:
                continue
            if trigger == "drag_drop" and e.target is not None:
                if drop_target is None or e.target not in self.ancestors(drop_target.id):
                    continue
            done.append(self.apply(e, w))
        return done

    def apply(self, e: Effect, source: Widget | None) -> str:
        a = e.args
        s = self.s
        target = self.by_id[a["widget"]] if "widget" in a else source
        op = e.op
        if op == "set_setting":
            s.settings[a["key"]] = a["value"]
        elif op == "add_setting":
            value = s.settings.get(a["key"], 0) + a["delta"]
            if "min" in a:
                value = max(value, a["min"])
            if "max" in a:
                value = min(value, a["max"])
            s.settings[a["key"]] = value
        elif op == "set_setting_from_text":
            s.settings[a["key"]] = target.text
        elif op == "set_setting_from_state":
            s.settings[a["key"]] = target.state.get(a["state_key"])
        elif op == "open_window":
            win = self.by_id[a["window"]]
            win.state["visible"] = True
            s.windows.remove(win)
            s.windows.append(win)
        elif op == "close_window":
            win = self.by_id[a["window"]]
            if s.focus is not None and self.window_of(s.focus) == win.id:
                self.blur()
            win.state["visible"] = False
        elif op == "set_text":
            target.text = str(a["text"])
        elif op == "set_text_from_setting":
            target.text = str(a.get("fmt", "{}")).format(s.settings.get(a["key"]))
        elif op == "set_state":
            target.state[a["key"]] = a["value"]
        elif op == "toggle_state":
            target.state[a["key"]] = not target.state.get(a["key"], False)
        elif op == "show":
            target.state["visible"] = True
        elif op == "hide":
            if s.focus is not None and target.id in self.ancestors(s.focus):
                self.blur()
            target.state["visible"] = False
        elif op in ("move_file", "delete_file", "create_folder"):
            return self._vfs(op, a)
        elif op == "add_keyframe":
            head = target.state.get("playhead")
            if head is None:
                return f"{op} {target.id}: no playhead"
            target.state[f"kf:{int(head)}"] = True
        return f"{op} {target.id if target is not None else ''}".rstrip()

    def _vfs(self, op: str, a) -> str:
        def folder(parts, create=False):
            node = self.s.vfs
            for p in parts:
                if p not in node:
                    if not create:
                        return None
                    node[p] = {}
                node = node[p]
                if not isinstance(node, dict):
                    return None
            return node

        if op == "create_folder":
            parts = _vfs_split(a["path"])
            folder(parts, create=True)
            return f"{op} {a['path']}"
        src = _vfs_split(a["src"] if op == "move_file" else a["path"])
        parent = folder(src[:-1])
        if parent is None or not src or src[-1] not in parent:
            return f"{op} failed: no such path"
        if op == "delete_file":
            del parent[src[-1]]
            return f"{op} {a['path']}"
        dst = folder(_vfs_split(a["dst"]))
        if dst is None or src[-1] in dst:
            return f"{op} failed: bad destination"
        dst[src[-1]] = parent.pop(src[-1])
        return f"{op} {a['src']} -> {a['dst']}"

    # ---- focus and keyboard ----

    def blur(self) -> None:
        fid = self.s.focus
        if fid is None:
            return
        w = self.by_id[fid]
        self.s.focus = None
        w.state.pop("selected", None)
        self.fire(w, "text_commit")

    def insert(self, w: Widget, text: str) -> None:
        if w.state.pop("selected", False):
            w.text = text
        else:
            w.text += text

    def key(self, combo: str) -> str:
        fid = self.s.focus
        if fid is not None and self.shown(fid):
            w = self.by_id[fid]
            handled = self._field_key(w, combo)
            if handled:
                return handled
        effects = self.s.bindings.get(combo)
        if effects is None:
            for k, v in self.s.bindings.items():
                if normalize_combo(k.split("+")) == combo:
                    effects = v
                    break
        if effects:
            return "; ".join(self.apply(e, None) for e in effects)
        return f"key {combo}: noop"

    def _field_key(self, w: Widget, combo: str) -> str | None:
        if combo == "ctrl+a":
            w.state["selected"] = True
            return f"select {w.id}"
        if combo == "enter":
            self.fire(w, "text_commit")
            return f"commit {w.id}"
        if combo == "tab":
            self.blur()
            return f"blur {w.id}"
        if combo == "esc":
            w.state.pop("selected", None)
            return f"deselect {w.id}"
        if combo == "backspace":
            if w.state.pop("selected", False):
                w.text = ""
            else:
                w.text = w.text[:-1]
            return f"backspace {w.id}"
        if combo == "space":
            self.insert(w, " ")
            return f"type {w.id}"
        if len(combo) == 1 and combo.isalnum():
            self.insert(w, combo)
            return f"type {w.id}"
        if combo.startswith("shift+") and len(combo) == 7 and combo[-1].isalnum():
            self.insert(w, combo[-1].upper())
            return f"type {w.id}"
        return None

    # ---- pointer ----

    def click(self, x: int, y: int) -> str:
        w, cy = self.hit(x, y)
        if w is None:
            self.blur()
            self.s.last_click = None
            return "click: noop"
        if w.kind == "text_field":
            if self.s.focus != w.id:
                self.blur()
                self.s.focus = w.id
            out = [f"focus {w.id}"]
        else:
            self.blur()
            out = [f"click {w.id}"]
        if w.kind == "checkbox":
            w.state["checked"] = not w.state.get("checked", False)
            out += self.fire(w, "toggle")
        elif w.kind == "canvas":
            out.append(self._canvas_click(w, x, cy))
        out += self.fire(w, "click")

        last = self.s.last_click
        window = DOUBLE_CLICK_MS // TICK_MS
        if last is not None and last[1] == w.id and self.s.tick - last[0] <= window:
            out += ["double_click"] + self.fire(w, "double_click")
            self.s.last_click = None
        else:
            self.s.last_click = (self.s.tick, w.id)
        return "; ".join(out)

    def _canvas_cell(self, w: Widget, x: int, y: int) -> tuple[int, int]:
        cp = self.s.cell_px
        cols, rows = w.bbox[2] // cp, w.bbox[3] // cp
        c = min(max((x - w.bbox[0]) // cp, 0), cols - 1)
        r = min(max((y - w.bbox[1]) // cp, 0), rows - 1)
        return c, r

    def _canvas_click(self, w: Widget, x: int, y: int) -> str:
        c, r = self._canvas_cell(w, x, y)
        if w.state.get("mode") == "timeline":
            w.state["playhead"] = c
            return f"playhead {c}"
        if w.state.get("brush") is None:
            return "paint: no brush"
        w.state[f"px:{c},{r}"] = w.state["brush"]
        return f"paint {c},{r}"

    def right_click(self, x: int, y: int) -> str:
        w, _ = self.hit(x, y)
        if w is None:
            return "right_click: noop"
        return "; ".join([f"right_click {w.id}"] + self.fire(w, "right_click"))

    def mouse_down(self) -> str:
        x, y = self.s.cursor
        w, _ = self.hit(x, y)
        self.s.mouse_down = True
        self.s.drag = (w.id if w else None, x, y)
        return f"mouse_down {w.id if w else ''}".rstrip()

    def mouse_up(self) -> str:
        if not self.s.mouse_down:
            return "mouse_up: noop"
        self.s.mouse_down = False
        (src_id, sx, sy), self.s.drag = self.s.drag, None
        x, y = self.s.cursor
        if (sx, sy) == (x, y):
            return self.click(x, y)
        if src_id is None:
            return "drop: noop"
        src = self.by_id[src_id]
        target, ty = self.hit(x, y)
        if src.kind == "canvas":
            if target is not src:
                return "drop: outside canvas"
            # same widget, so the scroll offset applies equally to both ends
            return self._canvas_drag(src, sx, sy + (ty - y), x, ty)
        out = [f"drop {src.id} -> {target.id if target else 'desktop'}"]
        return "; ".join(out + self.fire(src, "drag_drop", target))

    def _canvas_drag(self, w: Widget, sx: int, sy: int, x: int, y: int) -> str:
        c0, r0 = self._canvas_cell(w, sx, sy)
        c1, r1 = self._canvas_cell(w, x, y)
        if w.state.get("mode") == "timeline":
            w.state["playhead"] = c1
            return f"playhead {c1}"
        brush = w.state.get("brush")
        if brush is None:
            return "paint: no brush"
        for c in range(min(c0, c1), max(c0, c1) + 1):
            for r in range(min(r0, r1), max(r0, r1) + 1):
                w.state[f"px:{c},{r}"] = brush
        return f"paint {min(c0, c1)},{min(r0, r1)}..{max(c0, c1)},{max(r0, r1)}"

    def scroll(self, amount: int) -> str:
        x, y = self.s.cursor
        w, _ = self.hit(x, y)
        area = None
        for wid in self.ancestors(w.id if w else None):
            if self.by_id[wid].kind == "scroll_area":
                area = self.by_id[wid]
                break
        if area is None:
            return "scroll: noop"
        cp = self.s.cell_px
        max_off = int(area.state.get("max_offset", 0))
        off = int(area.state.get("scroll_offset", 0)) - amount * cp
        area.state["scroll_offset"] = min(max(off, 0), max_off)
        return f"scroll {area.id} {area.state['scroll_offset']}"

    # ---- dispatch ----

    def dispatch(self, action) -> str:
        s = self.s
        s.tick += 1
        if isinstance(action, dsl.MoveTo):
            s.cursor = (action.x, action.y)
            return "move"
        if isinstance(action, dsl.Click):
            s.cursor = (action.x, action.y)
            return self.click(action.x, action.y)
        if isinstance(action, dsl.DoubleClick):
            s.cursor = (action.x, action.y)
            return self.click(action.x, action.y) + " | " + self.click(action.x, action.y)
        if isinstance(action, dsl.RightClick):
            s.cursor = (action.x, action.y)
            return self.right_click(action.x, action.y)
        if isinstance(action, dsl.Write):
            if s.focus is not None and self.shown(s.focus):
                self.insert(self.by_id[s.focus], action.text)
                return f"write {s.focus}"
            return "write: noop"
        if isinstance(action, dsl.Hotkey):
            return self.key(normalize_combo(action.keys))
        if isinstance(action, dsl.Press):
            held = [m for m in MODIFIERS if m in s.pressed_keys and m != action.key]
            return self.key(normalize_combo(held + [action.key]))
        if isinstance(action, dsl.KeyDown):
            s.pressed_keys = s.pressed_keys | {action.key}
            return f"key_down {action.key}"
        if isinstance(action, dsl.KeyUp):
            s.pressed_keys = s.pressed_keys - {action.key}
            return f"key_up {action.key}"
        if isinstance(action, dsl.Scroll):
            return self.scroll(action.amount)
        if isinstance(action, dsl.MouseDown):
            if s.mouse_down:
                return "mouse_down: already down"
            return self.mouse_down()
        if isinstance(action, dsl.MouseUp):
            return self.mouse_up()
        if isinstance(action, dsl.DragTo):
            if not s.mouse_down:
                self.mouse_down()
            s.cursor = (action.x, action.y)
            return self.mouse_up()
        raise TypeError(f"not an action: {action!r}")


def execute(state: EnvState, script) -> tuple[EnvState, ExecReport]:
    """Apply ``script`` to a copy of ``state``.

    Raises :class:`OutOfBoundsError` (before touching anything) if any
    pointer action targets a point outside the screen.
    """
    w, h = state.screen
    oob = [v for v in dsl.validate(script, w, h) if isinstance(v, dsl.OutOfBounds)]
    if oob:
        raise OutOfBoundsError(oob)
    new = state.copy()
    machine = _Machine(new)
    results = tuple(machine.dispatch(a) for a in script)
    return new, ExecReport(results, new.tick, new.state_hash())
