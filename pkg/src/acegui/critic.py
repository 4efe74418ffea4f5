"""Judging the last action from the screen before and after it.

The critic compares two parsed screens with a keyed structural diff and
asks the language model for two flags: did the last action succeed, and
is the current subtask finished.

Reply grammar (one line)::

    success=<true|false>; finished=<true|false>; <success note>; <finish note>

A note of ``-`` means empty. Notes may not contain ``;``. A false flag
needs a non-empty note.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, replace
from typing import Any, Sequence

from . import action_dsl as dsl
from . import prompts
from .gui_parser import Element, Panel, UIDocument
from .llm_backend import Backend

__all__ = [
    "Critique",
    "CritiqueFormatError",
    "DiffEntry",
    "DocDiff",
    "assess",
    "diff",
    "first_critique",
    "parse_critique",
    "patch",
    "render_critique",
    "render_diff",
]

ELEMENT_FIELDS = ("text", "icon_name", "state", "confidence")
PANEL_FIELDS = ("bbox", "unclaimed")
ORDER = "order"
ALL_PANELS = None  # panel field of the document-level order entry

# (bbox, role, n): n counts earlier elements of the panel with the same
# bbox and role, which keeps keys unique even in odd documents
ElementKey = tuple[tuple[int, int, int, int], str, int]


class CritiqueFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Critique:
    success: bool
    success_note: str
    finished: bool
    finish_note: str

    def __post_init__(self) -> None:
        if not self.success and not self.success_note.strip():
            raise ValueError("a failed action needs a note")
        if not self.finished and not self.finish_note.strip():
            raise ValueError("an unfinished subtask needs a note")

    def to_dict(self) -> dict:
        return {"success": self.success, "success_note": self.success_note,
                "finished": self.finished, "finish_note": self.finish_note}

    @classmethod
    def from_dict(cls, d) -> "Critique":
        return cls(d["success"], d["success_note"], d["finished"], d["finish_note"])


def first_critique() -> Critique:
    """Stand-in critique before any action has been taken."""
    return Critique(True, "", False, "no action yet")


@dataclass(frozen=True)
class DiffEntry:
    panel: str | None
    element: ElementKey | None
    field: str | None
    old: Any
    new: Any


@dataclass(frozen=True)
class DocDiff:
    added: tuple[DiffEntry, ...] = ()
    removed: tuple[DiffEntry, ...] = ()
    changed: tuple[DiffEntry, ...] = ()

    def __bool__(self) -> bool:
        return bool(self.added or self.removed or self.changed)

    def __len__(self) -> int:
        return len(self.added) + len(self.removed) + len(self.changed)


def _keyed(elements: Sequence[Element]) -> list[tuple[ElementKey, Element]]:
    seen: Counter = Counter()
    out = []
    for e in elements:
        k = (e.bbox, e.role)
        out.append(((e.bbox, e.role, seen[k]), e))
        seen[k] += 1
    return out


def _panel_names(doc: UIDocument) -> list[str]:
    names = [p.name for p in doc.panels]
    if len(set(names)) != len(names):
        raise ValueError("document has duplicate panel names")
    return names


def _merge_order(old: Sequence, new: Sequence) -> list:
    """Order patch() produces without an explicit order entry."""
    new_set = set(new)
    old_set = set(old)
    return [k for k in old if k in new_set] + [k for k in new if k not in old_set]


def diff(old: UIDocument, new: UIDocument) -> DocDiff:
    """Structural diff keyed by panel name, then element (bbox, role)."""
    added: list[DiffEntry] = []
    removed: list[DiffEntry] = []
    changed: list[DiffEntry] = []
    old_names, new_names = _panel_names(old), _panel_names(new)
    old_panels = {p.name: p for p in old.panels}
    new_panels = {p.name: p for p in new.panels}

    for name in old_names:
        if name not in new_panels:
            removed.append(DiffEntry(name, None, None, old_panels[name], None))
    for name in new_names:
        if name not in old_panels:
            added.append(DiffEntry(name, None, None, None, new_panels[name]))
            continue
        op, np_ = old_panels[name], new_panels[name]
        for f in PANEL_FIELDS:
            if getattr(op, f) != getattr(np_, f):
                changed.append(DiffEntry(name, None, f, getattr(op, f), getattr(np_, f)))
        old_el = _keyed(op.elements)
        new_el = _keyed(np_.elements)
        old_map, new_map = dict(old_el), dict(new_el)
        for k, e in old_el:
            if k not in new_map:
                removed.append(DiffEntry(name, k, None, e, None))
        for k, e in new_el:
            if k not in old_map:
                added.append(DiffEntry(name, k, None, None, e))
                continue
            for f in ELEMENT_FIELDS:
                a, b = getattr(old_map[k], f), getattr(e, f)
                if a != b:
                    changed.append(DiffEntry(name, k, f, a, b))
        old_keys = [k for k, _ in old_el]
        new_keys = [k for k, _ in new_el]
        if _merge_order(old_keys, new_keys) != new_keys:
            changed.append(DiffEntry(name, None, ORDER, tuple(old_keys), tuple(new_keys)))
    if _merge_order(old_names, new_names) != new_names:
        changed.append(DiffEntry(ALL_PANELS, None, ORDER, tuple(old_names), tuple(new_names)))
    return DocDiff(tuple(added), tuple(removed), tuple(changed))


def patch(old: UIDocument, d: DocDiff) -> UIDocument:
    """Apply a diff produced by :func:`diff` against ``old``."""
    names = _panel_names(old)
    panels: dict[str, Panel] = {p.name: p for p in old.panels}
    elements: dict[str, dict[ElementKey, Element]] = {p.name: dict(_keyed(p.elements)) for p in old.panels}
    order: dict[str, list[ElementKey]] = {n: list(elements[n]) for n in names}

    for e in d.removed:
        if e.element is None:
            names.remove(e.panel)
            del panels[e.panel], elements[e.panel], order[e.panel]
        else:
            del elements[e.panel][e.element]
            order[e.panel].remove(e.element)
    for e in d.added:
        if e.element is None:
            names.append(e.panel)
            panels[e.panel] = e.new
            elements[e.panel] = dict(_keyed(e.new.elements))
            order[e.panel] = list(elements[e.panel])
        else:
            elements[e.panel][e.element] = e.new
            order[e.panel].append(e.element)
    for e in d.changed:
        if e.panel is ALL_PANELS:
            names = list(e.new)
        elif e.element is None and e.field == ORDER:
            order[e.panel] = list(e.new)
        elif e.element is None:
            panels[e.panel] = replace(panels[e.panel], **{e.field: e.new})
        else:
            elements[e.panel][e.element] = replace(elements[e.panel][e.element], **{e.field: e.new})

    out = []
    for n in names:
        els = tuple(elements[n][k] for k in order[n])
        out.append(Panel(n, panels[n].bbox, els, panels[n].unclaimed))
    return UIDocument(tuple(out))


# ---- prompt rendering ----


def _describe(e: Element) -> str:
    s = f"{e.role} {dsl.quote(e.text)}"
    if e.icon_name:
        s += f" icon={e.icon_name}"
    if e.state:
        s += f" state={dsl.quote(e.state)}"
    return s + f" @ {tuple(e.bbox)}"


def render_diff(d: DocDiff) -> str:
    if not d:
        return "(no visible change)"
    lines = []
    for e in d.added:
        lines.append(f"+ panel {dsl.quote(e.panel)}" if e.element is None
                     else f"+ [{e.panel}] {_describe(e.new)}")
    for e in d.removed:
        lines.append(f"- panel {dsl.quote(e.panel)}" if e.element is None
                     else f"- [{e.panel}] {_describe(e.old)}")
    for e in d.changed:
        if e.panel is ALL_PANELS:
            lines.append("~ panels reordered")
        elif e.field == ORDER:
            lines.append(f"~ [{e.panel}] reordered")
        elif e.element is None:
            lines.append(f"~ panel {dsl.quote(e.panel)} {e.field}: {e.old!r} -> {e.new!r}")
        else:
            bbox, role, _ = e.element
            lines.append(f"~ [{e.panel}] {role} @ {tuple(bbox)} {e.field}: {e.old!r} -> {e.new!r}")
    return "\n".join(lines)


def render_critique(c: Critique) -> str:
    return (f"success={str(c.success).lower()}; finished={str(c.finished).lower()}; "
            f"{c.success_note or '-'}; {c.finish_note or '-'}")


# ---- assessment ----

_REPLY_RE = re.compile(r"success=(true|false);\s*finished=(true|false);\s*([^;\n]*?)\s*;\s*([^;\n]*?)\s*")

NO_CHANGE_HINT = (
    "NOTE: the screen did not change after an action that should have changed it.\n"
    "Unless the action was meant to leave the screen as it was, answer success=false.\n"
)


def parse_critique(reply: str) -> Critique:
    m = _REPLY_RE.fullmatch(reply.strip())
    if m is None:
        raise CritiqueFormatError(f"reply does not match the critique grammar: {reply.strip()[:80]!r}")
    notes = ["" if n == "-" else n for n in (m.group(3), m.group(4))]
    try:
        return Critique(m.group(1) == "true", notes[0], m.group(2) == "true", notes[1])
    except ValueError as exc:
        raise CritiqueFormatError(str(exc)) from None


def _changes_state(script: Sequence) -> bool:
    return any(not isinstance(a, dsl.MoveTo) for a in script)


def assess(old_doc: UIDocument, new_doc: UIDocument, last_action: Sequence, subtask: str,
           llm: Backend, log: list | None = None) -> Critique:
    """Ask the backend to judge ``last_action`` given the two screens.

    ``log``, when given, receives one ``(template_id, prompt, reply)``
    tuple per backend call.
    """
    d = diff(old_doc, new_doc)
    bias = NO_CHANGE_HINT if not d and _changes_state(last_action) else ""
    prompt = prompts.render("critic.assess/v1", subtask=subtask, action=dsl.render(last_action) or "(none)",
                            diff=render_diff(d), bias=bias)
    reply = llm.complete(prompt)
    if log is not None:
        log.append(("critic.assess/v1", prompt, reply))
    try:
        return parse_critique(reply)
    except CritiqueFormatError as first:
        retry = prompts.render("critic.repair/v1", error=str(first), reply=reply, prompt=prompt)
        reply2 = llm.complete(retry)
        if log is not None:
            log.append(("critic.repair/v1", retry, reply2))
        try:
            return parse_critique(reply2)
        except CritiqueFormatError as second:
            raise CritiqueFormatError(f"malformed critique after one reprompt: {second}") from second
