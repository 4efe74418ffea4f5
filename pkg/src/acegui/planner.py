"""Hierarchical task plans built from a tutorial transcript and a query.

A plan is a two-level tree: milestones, each holding an ordered list of
subtasks. The agent only ever works on leaves (subtasks), visited left to
right. Plans travel to and from the language model as an outline::

    1. Open panel
      a. click menu
      b. choose Export
    2. Export
      a. press hotkey

Milestones are numbered from 1 and subtasks are lettered from ``a`` within
each milestone. Indentation of subtask lines is required but its width is
free. Blank lines are ignored; anything else is a format error.
"""

from __future__ import annotations

import re
import string
from dataclasses import dataclass

from . import prompts
from .action_dsl import strip_code_fence
from .llm_backend import Backend

__all__ = [
    "AlreadyDone",
    "Milestone",
    "PlanCursor",
    "PlanFormatError",
    "PlanTree",
    "extract_raw_plan",
    "flatten",
    "next_leaf",
    "parent",
    "parse_outline",
    "plan_from_query",
    "refine_plan",
    "render_outline",
    "start",
]


class PlanFormatError(ValueError):
    pass


class AlreadyDone(RuntimeError):
    pass


@dataclass(frozen=True)
class Milestone:
    text: str
    subtasks: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "subtasks", tuple(self.subtasks))
        if not self.text.strip():
            raise ValueError("milestone text is empty")
        if not self.subtasks:
            # a milestone with no subtasks is its own single step
            object.__setattr__(self, "subtasks", (self.text,))
        if any(not s.strip() for s in self.subtasks):
            raise ValueError("subtask text is empty")


@dataclass(frozen=True)
class PlanTree:
    milestones: tuple[Milestone, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "milestones", tuple(self.milestones))
        if not self.milestones:
            raise ValueError("a plan needs at least one milestone")

    @classmethod
    def of(cls, *items: tuple[str, list[str]] | str) -> "PlanTree":
        """Shorthand: ``PlanTree.of(("Open", ["click menu"]), "Export")``."""
        ms = []
        for it in items:
            ms.append(Milestone(it, ()) if isinstance(it, str) else Milestone(it[0], tuple(it[1])))
        return cls(tuple(ms))

    @property
    def leaf_count(self) -> int:
        return sum(len(m.subtasks) for m in self.milestones)

    def to_dict(self) -> dict:
        return {"milestones": [{"text": m.text, "subtasks": list(m.subtasks)} for m in self.milestones]}

    @classmethod
    def from_dict(cls, d) -> "PlanTree":
        return cls(tuple(Milestone(m["text"], tuple(m["subtasks"])) for m in d["milestones"]))


@dataclass(frozen=True)
class PlanCursor:
    milestone_idx: int = 0
    subtask_idx: int = 0
    done: bool = False

    def to_dict(self) -> dict:
        return {"milestone": self.milestone_idx, "subtask": self.subtask_idx, "done": self.done}


def start(tree: PlanTree) -> PlanCursor:
    return PlanCursor(0, 0, False)


def _check(tree: PlanTree, cursor: PlanCursor) -> None:
    if cursor.done:
        raise AlreadyDone("the plan is finished")
    if not (0 <= cursor.milestone_idx < len(tree.milestones)):
        raise IndexError(f"milestone index {cursor.milestone_idx} out of range")
    if not (0 <= cursor.subtask_idx < len(tree.milestones[cursor.milestone_idx].subtasks)):
        raise IndexError(f"subtask index {cursor.subtask_idx} out of range")


def next_leaf(tree: PlanTree, cursor: PlanCursor) -> PlanCursor:
    _check(tree, cursor)
    i, j = cursor.milestone_idx, cursor.subtask_idx
    if j + 1 < len(tree.milestones[i].subtasks):
        return PlanCursor(i, j + 1)
    if i + 1 < len(tree.milestones):
        return PlanCursor(i + 1, 0)
    return PlanCursor(i, j, True)


def parent(tree: PlanTree, cursor: PlanCursor) -> str:
    _check(tree, cursor)
    return tree.milestones[cursor.milestone_idx].text


def subtask(tree: PlanTree, cursor: PlanCursor) -> str:
    _check(tree, cursor)
    return tree.milestones[cursor.milestone_idx].subtasks[cursor.subtask_idx]


def flatten(tree: PlanTree) -> list[tuple[int, int, str]]:
    return [(i, j, s) for i, m in enumerate(tree.milestones) for j, s in enumerate(m.subtasks)]


# ---- outline format ----

_MILESTONE_RE = re.compile(r"(\d+)\.\s+(\S.*)")
_SUBTASK_RE = re.compile(r"[ \t]+([a-z])\.\s+(\S.*)")


def _letter(j: int) -> str:
    return string.ascii_lowercase[j]


def render_outline(tree: PlanTree) -> str:
    lines = []
    for i, m in enumerate(tree.milestones, 1):
        lines.append(f"{i}. {m.text}")
        for j, s in enumerate(m.subtasks):
            lines.append(f"  {_letter(j)}. {s}")
    return "\n".join(lines)


def parse_outline(text: str) -> PlanTree:
    milestones: list[tuple[str, list[str]]] = []
    for lineno, raw in enumerate(strip_code_fence(text).splitlines(), 1):
        line = raw.rstrip()
        if not line.strip():
            continue
        if m := _MILESTONE_RE.fullmatch(line):
            if int(m.group(1)) != len(milestones) + 1:
                raise PlanFormatError(f"line {lineno}: expected milestone {len(milestones) + 1}, got {m.group(1)}")
            milestones.append((m.group(2).strip(), []))
            continue
        if m := _SUBTASK_RE.fullmatch(line):
            if not milestones:
                raise PlanFormatError(f"line {lineno}: subtask before any milestone")
            subs = milestones[-1][1]
            if len(subs) >= 26 or m.group(1) != _letter(len(subs)):
                raise PlanFormatError(f"line {lineno}: expected subtask letter {_letter(len(subs)) if len(subs) < 26 else '?'}")
            subs.append(m.group(2).strip())
            continue
        raise PlanFormatError(f"line {lineno}: not an outline line: {line.strip()[:60]!r}")
    if not milestones:
        raise PlanFormatError("no milestones in reply")
    return PlanTree(tuple(Milestone(t, tuple(s)) for t, s in milestones))


def _ask(llm: Backend, template_id: str, log: list | None, **fields: str) -> PlanTree:
    prompt = prompts.render(template_id, **fields)
    reply = llm.complete(prompt)
    if log is not None:
        log.append((template_id, prompt, reply))
    try:
        return parse_outline(reply)
    except PlanFormatError as first:
        retry = prompts.render("plan.repair/v1", error=str(first), reply=reply, prompt=prompt)
        reply2 = llm.complete(retry)
        if log is not None:
            log.append(("plan.repair/v1", retry, reply2))
        try:
            return parse_outline(reply2)
        except PlanFormatError as second:
            raise PlanFormatError(f"malformed plan after one reprompt: {second}") from second


def extract_raw_plan(transcript: str, llm: Backend, log: list | None = None) -> PlanTree:
    """Outline of the steps a tutorial transcript walks through.

    A malformed reply gets one reprompt; ``log`` collects
    ``(template_id, prompt, reply)`` for each call.
    """
    if not transcript.strip():
        raise ValueError("transcript is empty")
    return _ask(llm, "plan.extract/v1", log, transcript=transcript)


def refine_plan(raw: PlanTree, query: str, llm: Backend, log: list | None = None) -> PlanTree:
    """Rewrite ``raw`` so it serves ``query``; the reply replaces the plan."""
    return _ask(llm, "plan.refine/v1", log, plan=render_outline(raw), query=query)


def plan_from_query(query: str, llm: Backend, log: list | None = None) -> PlanTree:
    """Plan without any tutorial, from the query alone."""
    if not query.strip():
        raise ValueError("query is empty")
    return _ask(llm, "plan.query/v1", log, query=query)
