"""Choosing the next action.

The actor keeps the plan cursor on the current subtask until the critic
reports it finished, then moves to the next leaf. For each step it asks
the language model for an action script given the parsed screen, the
subtask and its milestone, the last critique, the previous action and a
short history.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from . import action_dsl as dsl
from . import prompts
from .critic import Critique, render_critique
from .gui_parser import UIDocument, serialize
from .llm_backend import Backend
from .planner import PlanCursor, PlanTree, next_leaf

__all__ = [
    "ActionFormatError",
    "AgentStep",
    "BoundsError",
    "EPISODE_STEP_CAP",
    "HISTORY_WINDOW",
    "SUBTASK_STEP_CAP",
    "advance_subtask",
    "next_action",
]

HISTORY_WINDOW = 8
SUBTASK_STEP_CAP = 6
EPISODE_STEP_CAP = 60


class ActionFormatError(ValueError):
    pass


class BoundsError(ValueError):
    def __init__(self, violations: Sequence[dsl.OutOfBounds]):
        pts = ", ".join(f"({v.x}, {v.y})" for v in violations)
        super().__init__(f"action leaves the screen at {pts}")
        self.violations = tuple(violations)


@dataclass(frozen=True)
class HistoryItem:
    subtask: str
    action: tuple
    critique: Critique


@dataclass
class AgentStep:
    prev_action: list
    obs_doc: UIDocument
    subtask: str
    milestone: str
    critique: Critique
    history: list[HistoryItem] = field(default_factory=list)
    window: int = HISTORY_WINDOW

    def __post_init__(self) -> None:
        if len(self.history) > self.window:
            self.history = self.history[-self.window:]

    def remember(self, subtask: str, action: Sequence, critique: Critique) -> None:
        self.history.append(HistoryItem(subtask, tuple(action), critique))
        del self.history[:-self.window]


def advance_subtask(cursor: PlanCursor, critique: Critique, tree: PlanTree) -> PlanCursor:
    """Stay on the subtask until it is reported finished."""
    if cursor.done:
        raise ValueError("cursor is already done")
    return next_leaf(tree, cursor) if critique.finished else cursor


def _one_line(script: Sequence) -> str:
    return dsl.render(script).replace("\n", "; ") or "(none)"


def render_history(history: Sequence[HistoryItem]) -> str:
    if not history:
        return "(empty)"
    return "\n".join(f"- [{h.subtask}] {_one_line(h.action)} -> {render_critique(h.critique)}" for h in history)


def build_prompt(step: AgentStep, screen: tuple[int, int]) -> str:
    return prompts.render(
        "actor.step/v1",
        width=screen[0],
        height=screen[1],
        milestone=step.milestone,
        subtask=step.subtask,
        critique=render_critique(step.critique),
        prev_action=dsl.render(step.prev_action) or "(none)",
        history=render_history(step.history),
        screen=serialize(step.obs_doc) or "(empty screen)",
    )


def _checked(reply: str, screen: tuple[int, int]) -> list:
    script = dsl.parse(reply)
    problems = dsl.validate(script, *screen)
    outside = [v for v in problems if isinstance(v, dsl.OutOfBounds)]
    if outside:
        raise BoundsError(outside)
    unknown = [v for v in problems if isinstance(v, dsl.UnknownKey)]
    if unknown:
        raise dsl.ActionSyntaxError(f"unknown key {unknown[0].key!r} in action {unknown[0].index}", 0)
    return script


def next_action(step: AgentStep, llm: Backend, screen: tuple[int, int], log: list | None = None) -> list:
    """One backend call, plus one repair call if the reply does not parse.

    Out-of-bounds coordinates raise :class:`BoundsError` straight away.
    """
    prompt = build_prompt(step, screen)
    reply = llm.complete(prompt)
    if log is not None:
        log.append(("actor.step/v1", prompt, reply))
    try:
        return _checked(reply, screen)
    except dsl.ActionSyntaxError as first:
        retry = prompts.render("actor.repair/v1", error=str(first), reply=reply, prompt=prompt)
        reply2 = llm.complete(retry)
        if log is not None:
            log.append(("actor.repair/v1", retry, reply2))
        try:
            return _checked(reply2, screen)
        except dsl.ActionSyntaxError as second:
            raise ActionFormatError(f"unparseable action after one repair: {second}") from second
