"""Screen parsing: Observation -> panel-by-panel structured document.

The pipeline runs a fixed sequence of extractors per panel:

1. ``segment_panels`` -- cells are assigned to metadata panels (topmost,
   innermost wins); leftover cells go to a synthetic ``Desktop`` panel;
2. ``extract_text`` -- maximal horizontal runs of glyph cells;
3. ``match_icons`` -- connected icon regions looked up by pattern signature;
4. ``detect_widgets`` -- scrollbars, reference lines, checkboxes, buttons and
   painted objects found from fill colors.

Bounding boxes in the document are in screen pixels so they can be fed
straight back into pointer actions.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import ndimage

from . import action_dsl as dsl
from . import prompts
from .sim_desktop.render import (
    CHECKED, KEYFRAME, LINE, SCROLL, THUMB, UNCHECKED, Observation, SymbolicRaster,
)

ROLES = ("text", "icon", "button", "checkbox", "scrollbar", "reference_line", "object")
TOOLS = ("text", "icons", "widgets")
DESKTOP_PANEL = "Desktop"
NOISE_TOKEN = "#drop"
_BUTTON_FILLS = ("#btn", "#menu")

BBox = tuple[int, int, int, int]


@dataclass(frozen=True)
class Element:
    role: str
    bbox: BBox
    text: str = ""
    icon_name: str | None = None
    state: str = ""
    confidence: float = 1.0

    @property
    def key(self) -> tuple[BBox, str]:
        return (self.bbox, self.role)

    def sort_key(self):
        x, y, w, h = self.bbox
        return (y, x, h, w, self.role, self.text, self.icon_name or "", self.state, self.confidence)


@dataclass(frozen=True)
class Panel:
    name: str
    bbox: BBox
    elements: tuple[Element, ...] = ()
    unclaimed: int = 0
    # cells owned by this panel; None means the whole bbox
    mask: np.ndarray | None = field(default=None, compare=False, repr=False, hash=False)


@dataclass(frozen=True)
class UIDocument:
    panels: tuple[Panel, ...] = ()

    def panel(self, name: str) -> Panel:
        for p in self.panels:
            if p.name == name:
                return p
        raise KeyError(name)

    def elements(self) -> Iterable[tuple[str, Element]]:
        for p in self.panels:
            for e in p.elements:
                yield p.name, e

    def find(self, text: str, role: str | None = None) -> Element | None:
        """First element (reading order) whose text equals ``text``."""
        for _, e in self.elements():
            if e.text == text and (role is None or e.role == role):
                return e
        return None


@dataclass(frozen=True)
class IconTemplate:
    icon_name: str
    pattern: tuple[str, ...]

    @property
    def signature(self) -> tuple[str, ...]:
        return tuple(self.pattern)


def template_index(templates: Sequence[IconTemplate]) -> dict[tuple[str, ...], str]:
    index: dict[tuple[str, ...], str] = {}
    for t in templates:
        if t.signature in index:
            raise ValueError(f"templates {index[t.signature]!r} and {t.icon_name!r} share a signature")
        index[t.signature] = t.icon_name
    return index


def load_templates(mapping: Mapping[str, Sequence[str]]) -> list[IconTemplate]:
    return [IconTemplate(name, tuple(rows)) for name, rows in sorted(mapping.items())]


@dataclass(frozen=True)
class ParserConfig:
    noise_p: float = 0.0
    seed: int = 0
    use_panels: bool = True
    tools: tuple[str, ...] = TOOLS
    orchestrator: object | None = None  # a Backend choosing tools per panel


# ---- cell classification ----


def _kinds(raster: SymbolicRaster) -> tuple[np.ndarray, np.ndarray]:
    glyph, icon = raster.kinds
    return glyph.copy(), icon.copy()


def _px(raster: SymbolicRaster, c0: int, r0: int, cw: int, ch: int) -> BBox:
    cp = raster.cell_px
    return (c0 * cp, r0 * cp, cw * cp, ch * cp)


def _panel_mask(raster: SymbolicRaster, panel: Panel) -> np.ndarray:
    if panel.mask is not None:
        return panel.mask
    cp = raster.cell_px
    x, y, w, h = panel.bbox
    mask = np.zeros((raster.height, raster.width), dtype=bool)
    mask[y // cp:(y + h) // cp, x // cp:(x + w) // cp] = True
    return mask


def apply_glyph_noise(raster: SymbolicRaster, p: float, seed: int) -> SymbolicRaster:
    """Drop each glyph cell independently with probability ``p``.

    The random draw covers the whole raster in row-major order, so the
    outcome for a cell does not depend on which panel is being parsed.
    """
    if p <= 0:
        return raster
    grid = raster.array.copy()
    glyph, _ = _kinds(raster)
    draw = np.random.default_rng(seed).random(grid.shape)
    grid[glyph & (draw < p)] = NOISE_TOKEN
    return SymbolicRaster.from_array(grid, raster.cell_px)


# ---- panels ----


def segment_panels(obs: Observation) -> list[Panel]:
    """One panel per metadata node plus a trailing ``Desktop`` panel.

    Windows are painted in z-order and a panel after its parent, so every
    cell belongs to the topmost, innermost node covering it; cells covered by
    no node belong to ``Desktop``.
    """
    raster = obs.raster
    cp = raster.cell_px
    owner = np.full((raster.height, raster.width), -1, dtype=int)
    nodes = [node for root in obs.metadata for node in root.walk()]
    for i, node in enumerate(nodes):
        x, y, w, h = node.bbox
        owner[y // cp:(y + h) // cp, x // cp:(x + w) // cp] = i

    seen: dict[str, int] = {DESKTOP_PANEL: 1}
    panels = []
    full = (0, 0, raster.width * cp, raster.height * cp)
    for i, node in enumerate(nodes):
        name = node.name
        if name in seen:
            seen[name] += 1
            name = f"{name} ({seen[node.name]})"
        else:
            seen[name] = 1
        x, y, w, h = node.bbox
        bbox = (x, y, min(w, full[2] - x), min(h, full[3] - y))
        panels.append(Panel(name, bbox, mask=owner == i))
    panels.append(Panel(DESKTOP_PANEL, full, mask=owner == -1))
    return panels


# ---- extractors ----


def extract_text(raster: SymbolicRaster, panel: Panel, noise_p: float = 0.0, seed: int = 0) -> list[Element]:
    """Maximal horizontal runs of glyph cells inside the panel."""
    raster = apply_glyph_noise(raster, noise_p, seed)
    grid = raster.array
    glyph, _ = _kinds(raster)
    glyph &= _panel_mask(raster, panel)
    out = []
    for r in np.flatnonzero(glyph.any(axis=1)):
        row = glyph[r]
        c = 0
        while c < raster.width:
            if not row[c]:
                c += 1
                continue
            start = c
            while c < raster.width and row[c]:
                c += 1
            text = "".join(grid[r, start:c])
            out.append(Element("text", _px(raster, start, int(r), c - start, 1), text))
    return out


def match_icons(raster: SymbolicRaster, panel: Panel, templates: Sequence[IconTemplate]) -> list[Element]:
    """Connected icon regions, named when their pattern matches a template."""
    index = template_index(templates)
    grid = raster.array
    _, icon = _kinds(raster)
    icon &= _panel_mask(raster, panel)
    labels, count = ndimage.label(icon)
    out = []
    for k, sl in enumerate(ndimage.find_objects(labels), start=1):
        rows, cols = sl
        part = labels[sl] == k
        sub = grid[sl]
        signature = tuple(
            "".join(sub[r, c][1] if part[r, c] else " " for c in range(sub.shape[1]))
            for r in range(sub.shape[0])
        )
        bbox = _px(raster, cols.start, rows.start, cols.stop - cols.start, rows.stop - rows.start)
        name = index.get(signature)
        if name is None:
            out.append(Element("icon", bbox, "", None, "", 0.5))
        else:
            out.append(Element("icon", bbox, name, name))
    return out


def _runs(line: np.ndarray) -> list[tuple[int, int]]:
    out, i, n = [], 0, len(line)
    while i < n:
        if line[i]:
            j = i
            while j < n and line[j]:
                j += 1
            out.append((i, j))
            i = j
        else:
            i += 1
    return out


def detect_widgets(raster: SymbolicRaster, panel: Panel) -> list[Element]:
    """Scrollbars, reference lines, checkboxes, buttons and painted objects.

    * scrollbar: a run (>= 2 cells) of scroll-track/thumb fill, vertical
      first; horizontal runs use the cells not already taken;
    * reference_line: a 1-cell-wide vertical run (>= 3 cells) of line fill;
    * checkbox: a check cell, labelled by the glyph run two cells right;
    * button: a connected region of button/menu fill together with the
      text and icon runs it encloses on each row;
    * object: a connected region of one paint color, or a keyframe mark.
    """
    grid = raster.array
    mask = _panel_mask(raster, panel)
    glyph, icon = _kinds(raster)
    out: list[Element] = []

    track = np.isin(grid, [SCROLL, THUMB]) & mask
    thumb = (grid == THUMB) & mask
    used = np.zeros_like(track)
    for c in range(raster.width):
        for r0, r1 in _runs(track[:, c]):
            if r1 - r0 >= 2:
                used[r0:r1, c] = True
                t = np.flatnonzero(thumb[r0:r1, c])
                state = f"thumb={t[0]}-{t[-1] + 1}/{r1 - r0}" if len(t) else ""
                out.append(Element("scrollbar", _px(raster, c, r0, 1, r1 - r0), "", None, state))
    for r in range(raster.height):
        for c0, c1 in _runs(track[r] & ~used[r]):
            if c1 - c0 >= 2:
                t = np.flatnonzero(thumb[r, c0:c1])
                state = f"thumb={t[0]}-{t[-1] + 1}/{c1 - c0}" if len(t) else ""
                out.append(Element("scrollbar", _px(raster, c0, r, c1 - c0, 1), "", None, state))

    line = (grid == LINE) & mask
    padded = np.pad(line, ((0, 0), (1, 1)))
    lone = line & ~padded[:, :-2] & ~padded[:, 2:]
    for c in range(raster.width):
        for r0, r1 in _runs(lone[:, c]):
            if r1 - r0 >= 3:
                out.append(Element("reference_line", _px(raster, c, r0, 1, r1 - r0)))

    for r, c in zip(*np.nonzero(np.isin(grid, [CHECKED, UNCHECKED]) & mask)):
        label = ""
        cc = c + 2
        while cc < raster.width and glyph[r, cc] and mask[r, cc]:
            label += grid[r, cc]
            cc += 1
        state = "checked" if grid[r, c] == CHECKED else "unchecked"
        out.append(Element("checkbox", _px(raster, int(c), int(r), 1, 1), label, None, state))

    fill = np.isin(grid, _BUTTON_FILLS) & mask
    body = fill.copy()
    content = (glyph | icon) & mask
    for r in range(raster.height):
        for c0, c1 in _runs(content[r]):
            if c0 > 0 and c1 < raster.width and fill[r, c0 - 1] and fill[r, c1]:
                body[r, c0:c1] = True
    labels, _ = ndimage.label(body)
    for k, sl in enumerate(ndimage.find_objects(labels), start=1):
        rows, cols = sl
        part = labels[sl] == k
        sub_glyph = glyph[sl] & part
        words = []
        for r in range(part.shape[0]):
            for c0, c1 in _runs(sub_glyph[r]):
                words.append("".join(grid[sl][r, c0:c1]))
        bbox = _px(raster, cols.start, rows.start, cols.stop - cols.start, rows.stop - rows.start)
        out.append(Element("button", bbox, " ".join(words)))

    tokens = sorted({t for t in grid[mask].tolist() if t.startswith("#p:") or t == KEYFRAME})
    for token in tokens:
        labels, _ = ndimage.label((grid == token) & mask)
        name = "keyframe" if token == KEYFRAME else token[3:]
        for sl in ndimage.find_objects(labels):
            rows, cols = sl
            bbox = _px(raster, cols.start, rows.start, cols.stop - cols.start, rows.stop - rows.start)
            out.append(Element("object", bbox, name))
    return out


# ---- pipeline ----


def _choose_tools(config: ParserConfig, panel: Panel) -> tuple[str, ...]:
    if config.orchestrator is None:
        return config.tools
    prompt = prompts.render("parser.tools/v1", panel=panel.name, tools=", ".join(TOOLS))
    reply = config.orchestrator.complete(prompt)
    chosen = {t.strip() for t in reply.split(",")}
    # fixed invocation order regardless of reply order
    return tuple(t for t in TOOLS if t in chosen and t in config.tools)


def _unclaimed(raster: SymbolicRaster, panel: Panel, elements: Sequence[Element]) -> int:
    glyph, icon = _kinds(raster)
    pending = (glyph | icon) & _panel_mask(raster, panel)
    cp = raster.cell_px
    for e in elements:
        x, y, w, h = e.bbox
        pending[y // cp:(y + h) // cp, x // cp:(x + w) // cp] = False
    return int(pending.sum())


def parse_gui(obs: Observation, templates: Sequence[IconTemplate] = (), config: ParserConfig | None = None) -> UIDocument:
    config = config or ParserConfig()
    raster = apply_glyph_noise(obs.raster, config.noise_p, config.seed)
    if config.use_panels:
        panels = segment_panels(Observation(obs.metadata, raster))
    else:
        cp = raster.cell_px
        panels = [Panel(DESKTOP_PANEL, (0, 0, raster.width * cp, raster.height * cp))]
    out = []
    for panel in panels:
        elements: list[Element] = []
        tools = _choose_tools(config, panel)
        if "text" in tools:
            elements += extract_text(raster, panel)
        if "icons" in tools:
            elements += match_icons(raster, panel, templates)
        if "widgets" in tools:
            elements += detect_widgets(raster, panel)
        elements.sort(key=Element.sort_key)
        out.append(replace(panel, elements=tuple(elements), unclaimed=_unclaimed(raster, panel, elements)))
    return UIDocument(tuple(out))


# ---- text form ----


def _fmt_bbox(b: BBox) -> str:
    return f"({b[0]}, {b[1]}, {b[2]}, {b[3]})"


def serialize(doc: UIDocument) -> str:
    """Panel header lines, each followed by one indented line per element.

    ``panel 'Name' @ (x, y, w, h)[ unclaimed=N]``
    ``  role 'text'[ icon=name][ state='s'][ conf=c] @ (x, y, w, h)``
    """
    lines = []
    for p in doc.panels:
        head = f"panel {dsl.quote(p.name)} @ {_fmt_bbox(p.bbox)}"
        if p.unclaimed:
            head += f" unclaimed={p.unclaimed}"
        lines.append(head)
        for e in p.elements:
            parts = [f"  {e.role} {dsl.quote(e.text)}"]
            if e.icon_name is not None:
                parts.append(f"icon={e.icon_name}")
            if e.state:
                parts.append(f"state={dsl.quote(e.state)}")
            if e.confidence < 1.0:
                parts.append(f"conf={e.confidence!r}")
            parts.append(f"@ {_fmt_bbox(e.bbox)}")
            lines.append(" ".join(parts))
    return "\n".join(lines)


_BBOX_RE = re.compile(r"@ \((\d+), (\d+), (\d+), (\d+)\)")


class DocumentFormatError(ValueError):
    pass


def deserialize(text: str) -> UIDocument:
    """Inverse of :func:`serialize`."""
    panels: list[Panel] = []
    name: str | None = None
    bbox: BBox = (0, 0, 0, 0)
    unclaimed = 0
    elements: list[Element] = []

    def flush():
        if name is not None:
            panels.append(Panel(name, bbox, tuple(elements), unclaimed))

    for lineno, line in enumerate(text.split("\n") if text else [], start=1):
        try:
            if line.startswith("panel "):
                flush()
                name, pos = dsl.read_quoted(line, 6)
                m = _BBOX_RE.match(line, pos + 1)
                if not m:
                    raise DocumentFormatError("missing bbox")
                bbox = tuple(int(g) for g in m.groups())
                rest = line[m.end():]
                unclaimed = int(rest[len(" unclaimed="):]) if rest else 0
                elements = []
            elif line.startswith("  ") and name is not None:
                role, _, _ = line[2:].partition(" ")
                if role not in ROLES:
                    raise DocumentFormatError(f"unknown role {role!r}")
                etext, pos = dsl.read_quoted(line, 3 + len(role))
                icon_name, state, conf = None, "", 1.0
                while line.startswith(" ", pos) and not line.startswith(" @ ", pos):
                    pos += 1
                    if line.startswith("icon=", pos):
                        end = line.index(" ", pos)
                        icon_name, pos = line[pos + 5:end], end
                    elif line.startswith("state=", pos):
                        state, pos = dsl.read_quoted(line, pos + 6)
                    elif line.startswith("conf=", pos):
                        end = line.index(" ", pos)
                        conf, pos = float(line[pos + 5:end]), end
                    else:
                        raise DocumentFormatError("unexpected attribute")
                m = _BBOX_RE.fullmatch(line, pos + 1)
                if not m:
                    raise DocumentFormatError("missing bbox")
                elements.append(Element(role, tuple(int(g) for g in m.groups()), etext, icon_name, state, conf))
            else:
                raise DocumentFormatError("expected a panel header or an element line")
        except (DocumentFormatError, ValueError) as exc:
            raise DocumentFormatError(f"line {lineno}: {exc}") from None
    flush()
    return UIDocument(tuple(panels))
