"""Symbolic screenshots and panel metadata.

A :class:`SymbolicRaster` is a grid of cell tokens standing in for a
screenshot. A token is one of

* a single character -- a text glyph (a space is a glyph too),
* ``@`` followed by one character -- one cell of an icon's pattern,
* ``#`` followed by a color id -- a plain fill (``#desk``, ``#btn``, ...).

The raster is a pure function of the :class:`EnvState`.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping

import numpy as np

from .state import EnvState, Widget

DESKTOP = "#desk"
FILLS = {
    "window": "#win",
    "popup": "#popup",
    "title": "#title",
    "panel": "#panel",
    "button": "#btn",
    "menu_item": "#menu",
    "text_field": "#field",
    "scroll_area": "#area",
    "canvas": "#canvas",
}
SCROLL, THUMB = "#scroll", "#thumb"
LINE, KEYFRAME = "#line", "#key"
CHECKED, UNCHECKED = "#chk1", "#chk0"
SELECTED, BOLD, CARET = "#sel", "#bold", "#caret"


def is_glyph(token: str) -> bool:
    return len(token) == 1


def is_icon(token: str) -> bool:
    return len(token) == 2 and token[0] == "@"


def is_fill(token: str) -> bool:
    return len(token) > 1 and token[0] == "#"


@dataclass(frozen=True)
class SymbolicRaster:
    width: int
    height: int
    cell_px: int
    cells: tuple[tuple[str, ...], ...]

    @classmethod
    def blank(cls, width: int, height: int, cell_px: int, fill: str = DESKTOP) -> "SymbolicRaster":
        row = (fill,) * width
        return cls(width, height, cell_px, (row,) * height)

    @classmethod
    def from_array(cls, grid: np.ndarray, cell_px: int) -> "SymbolicRaster":
        h, w = grid.shape
        return cls(w, h, cell_px, tuple(tuple(str(t) for t in row) for row in grid.tolist()))

    @cached_property
    def array(self) -> np.ndarray:
        """Cells as an object array of shape (height, width)."""
        arr = np.empty((self.height, self.width), dtype=object)
        for r, row in enumerate(self.cells):
            arr[r, :] = row
        return arr

    @cached_property
    def kinds(self) -> tuple[np.ndarray, np.ndarray]:
        """Boolean (glyph, icon) masks; treat as read-only."""
        glyph = np.zeros((self.height, self.width), dtype=bool)
        icon = np.zeros_like(glyph)
        for r, row in enumerate(self.cells):
            for c, t in enumerate(row):
                if len(t) == 1:
                    glyph[r, c] = True
                elif len(t) == 2 and t[0] == "@":
                    icon[r, c] = True
        return glyph, icon

    def to_dict(self) -> dict:
        return {"width": self.width, "height": self.height, "cell_px": self.cell_px,
                "cells": [list(r) for r in self.cells]}

    @classmethod
    def from_dict(cls, d: Mapping) -> "SymbolicRaster":
        cells = tuple(tuple(r) for r in d["cells"])
        if len(cells) != d["height"] or any(len(r) != d["width"] for r in cells):
            raise ValueError("raster cell grid does not match its declared size")
        return cls(d["width"], d["height"], d["cell_px"], cells)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"), ensure_ascii=False)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def text(self) -> str:
        """Human-readable dump: glyphs as themselves, icons as their char, fills as '.'."""
        lines = []
        for row in self.cells:
            lines.append("".join(t if is_glyph(t) else t[1] if is_icon(t) else "." for t in row))
        return "\n".join(lines)


@dataclass(frozen=True)
class PanelMeta:
    name: str
    kind: str  # "window", "popup" or "panel"
    bbox: tuple[int, int, int, int]
    children: tuple["PanelMeta", ...] = ()

    def walk(self):
        yield self
        for c in self.children:
            yield from c.walk()

    def to_dict(self) -> dict:
        return {"name": self.name, "kind": self.kind, "bbox": list(self.bbox),
                "children": [c.to_dict() for c in self.children]}

    @classmethod
    def from_dict(cls, d: Mapping) -> "PanelMeta":
        return cls(d["name"], d["kind"], tuple(d["bbox"]),
                   tuple(cls.from_dict(c) for c in d.get("children", [])))


@dataclass(frozen=True)
class Observation:
    metadata: tuple[PanelMeta, ...]
    raster: SymbolicRaster
    state_hash: str = field(default="", compare=False)

    def to_dict(self) -> dict:
        return {"metadata": [m.to_dict() for m in self.metadata], "raster": self.raster.to_dict()}

    @classmethod
    def from_dict(cls, d: Mapping) -> "Observation":
        return cls(tuple(PanelMeta.from_dict(m) for m in d["metadata"]), SymbolicRaster.from_dict(d["raster"]))


# ---- rendering ----


class _Canvas:
    def __init__(self, state: EnvState):
        self.cp = state.cell_px
        self.w = state.screen[0] // self.cp
        self.h = state.screen[1] // self.cp
        self.grid = np.full((self.h, self.w), DESKTOP, dtype=object)
        self.state = state

    def put(self, c: int, r: int, token: str, clip) -> None:
        c0, r0, c1, r1 = clip
        if c0 <= c < c1 and r0 <= r < r1:
            self.grid[r, c] = token

    def fill(self, rect, token: str, clip) -> None:
        c0, r0, c1, r1 = _intersect(rect, clip)
        if c0 < c1 and r0 < r1:
            self.grid[r0:r1, c0:c1] = token

    def text(self, c: int, r: int, text: str, clip, limit: int | None = None) -> None:
        if limit is not None:
            text = text[:max(limit, 0)]
        for i, ch in enumerate(text):
            self.put(c + i, r, ch, clip)

    def icon(self, c: int, r: int, icon_id: str, clip) -> int:
        rows = self.state.icons[icon_id]
        for dr, row in enumerate(rows):
            for dc, ch in enumerate(row):
                self.put(c + dc, r + dr, "@" + ch, clip)
        return len(rows[0])


def _intersect(a, b):
    return (max(a[0], b[0]), max(a[1], b[1]), min(a[2], b[2]), min(a[3], b[3]))


def _cell_rect(bbox, cp: int, dy: int = 0):
    x, y, w, h = bbox
    return (x // cp, (y - dy) // cp, (x + w) // cp, (y - dy + h) // cp)


def render_raster(state: EnvState) -> SymbolicRaster:
    cv = _Canvas(state)
    screen = (0, 0, cv.w, cv.h)
    for win in state.windows:
        if win.visible:
            _draw(cv, win, screen, 0)
    return SymbolicRaster.from_array(cv.grid, state.cell_px)


def _draw(cv: _Canvas, w: Widget, clip, dy: int) -> None:
    cp = cv.cp
    rect = _cell_rect(w.bbox, cp, dy)
    c0, r0, c1, r1 = rect
    cw, ch = c1 - c0, r1 - r0
    mid = r0 + (ch - 1) // 2
    inner = _intersect(rect, clip)
    kind = w.kind

    if kind == "window":
        cv.fill(rect, FILLS["popup" if w.state.get("popup") else "window"], clip)
        cv.fill((c0, r0, c1, r0 + 1), FILLS["title"], clip)
        cv.text(c0 + 1, r0, w.text, inner, cw - 2)
    elif kind == "panel":
        cv.fill(rect, FILLS["panel"], clip)
        if w.text:
            cv.text(c0 + 1, r0, w.text, inner, cw - 2)
    elif kind in ("button", "menu_item"):
        cv.fill(rect, FILLS[kind], clip)
        col = c0 + 1
        if w.icon_id:
            col += cv.icon(col, r0 + (ch - len(cv.state.icons[w.icon_id])) // 2, w.icon_id, inner) + 1
        if w.text:
            cv.text(col, mid, w.text, inner, c1 - 1 - col)
    elif kind == "text_field":
        if w.state.get("selected"):
            token = SELECTED
        elif w.state.get("bold"):
            token = BOLD
        else:
            token = FILLS["text_field"]
        cv.fill(rect, token, clip)
        text = w.text[:max(cw - 2, 0)]
        align = w.state.get("align", "left")
        if align == "center":
            col = c0 + (cw - len(text)) // 2
        elif align == "right":
            col = c1 - 1 - len(text)
        else:
            col = c0 + 1
        cv.text(col, r0, text, inner)
        if cv.state.focus == w.id and not w.state.get("selected") and col + len(text) < c1:
            cv.put(col + len(text), r0, CARET, inner)
    elif kind == "checkbox":
        cv.put(c0, mid, CHECKED if w.state.get("checked") else UNCHECKED, inner)
        cv.text(c0 + 2, mid, w.text, inner, cw - 2)
    elif kind == "label":
        cv.text(c0, mid, w.text, inner, cw)
    elif kind == "icon":
        iw = cv.icon(c0, r0, w.icon_id, inner) if w.icon_id else 0
        if w.text:
            cv.text(c0 + iw + 1, r0, w.text, inner, cw - iw - 1)
    elif kind == "canvas":
        _draw_canvas(cv, w, rect, inner)
    elif kind == "scroll_area":
        cv.fill(rect, FILLS["scroll_area"], clip)

    if kind == "scroll_area":
        offset = int(w.state.get("scroll_offset", 0))
        max_offset = int(w.state.get("max_offset", 0))
        content_clip = (inner[0], inner[1], inner[2] - (1 if max_offset else 0), inner[3])
        for child in w.children:
            if child.visible:
                _draw(cv, child, content_clip, dy + offset)
        if max_offset:
            _draw_scrollbar(cv, c1 - 1, r0, ch, offset // cp, max_offset // cp, inner)
    else:
        for child in w.children:
            if child.visible:
                _draw(cv, child, inner, dy)


def _draw_scrollbar(cv: _Canvas, col: int, r0: int, ch: int, off: int, max_off: int, clip) -> None:
    cv.fill((col, r0, col + 1, r0 + ch), SCROLL, clip)
    thumb = max(1, (ch * ch) // (ch + max_off))
    start = r0 + ((ch - thumb) * off) // max_off
    cv.fill((col, start, col + 1, start + thumb), THUMB, clip)


def _draw_canvas(cv: _Canvas, w: Widget, rect, clip) -> None:
    c0, r0, c1, r1 = rect
    cv.fill(rect, FILLS["canvas"], clip)
    for key in sorted(w.state):
        if key.startswith("px:"):
            c, r = (int(v) for v in key[3:].split(","))
            cv.put(c0 + c, r0 + r, "#p:" + str(w.state[key]), clip)
    if w.state.get("mode") == "timeline":
        for key in sorted(w.state):
            if key.startswith("kf:"):
                cv.put(c0 + int(key[3:]), r0, KEYFRAME, clip)
        head = w.state.get("playhead")
        if head is not None:
            cv.fill((c0 + int(head), r0 + 1, c0 + int(head) + 1, r1), LINE, clip)


# ---- metadata ----


def _panel_children(w: Widget) -> list[PanelMeta]:
    out = []
    for child in w.children:
        if not child.visible or child.kind == "scroll_area":
            continue
        if child.kind == "panel":
            out.append(PanelMeta(child.text or child.id, "panel", child.bbox, tuple(_panel_children(child))))
        else:
            out.extend(_panel_children(child))
    return out


def panel_metadata(state: EnvState) -> tuple[PanelMeta, ...]:
    """Windows, pop-ups and panels only; leaf widgets are never exposed."""
    out = []
    for win in state.windows:
        if win.visible:
            kind = "popup" if win.state.get("popup") else "window"
            out.append(PanelMeta(win.text or win.id, kind, win.bbox, tuple(_panel_children(win))))
    return tuple(out)


def observe(state: EnvState) -> Observation:
    return Observation(panel_metadata(state), render_raster(state), state.state_hash())
