"""Scripted backends generated from a task's golden data.

A task's ``golden`` block holds the plan a competent model would produce
and one action script per subtask::

    {"raw_plan": {...}, "plan": {...}, "query_plan": {...},
     "steps": {"<subtask>": "<script>", ...},
     "lesion": {"subtask": "<subtask>", "wrong": "<script>"}}

``golden_backend`` answers every prompt correctly. ``lesioned_backend``
models one recurring mistake: on the lesioned subtask the actor first
emits the wrong script. The critic recognises that wrong script when it
is judged on its own and reports failure, after which the actor produces
the right one. Without planning the mistake is buried in one long
script, and without the critic nothing ever flags it.
"""

from __future__ import annotations

import re

from ..gui_parser import TOOLS
from ..llm_backend import ScriptedBackend, ScriptRule
from ..planner import PlanTree, flatten, render_outline
from .tasks import TaskSpec

__all__ = ["CRITIC_OK", "CRITIC_WRONG", "golden_backend", "golden_script", "lesioned_backend"]

CRITIC_OK = "success=true; finished=true; -; -"
CRITIC_WRONG = ("success=false; finished=false; the action did not affect the element the subtask is about; "
                "the subtask still needs the right action")


def _header(template_id: str) -> str:
    return f"### template: {template_id}\n"


def _plans(spec: TaskSpec) -> tuple[PlanTree, PlanTree, PlanTree]:
    g = spec.golden
    if not g:
        raise ValueError(f"task {spec.id} has no golden data")
    raw = PlanTree.from_dict(g["raw_plan"])
    plan = PlanTree.from_dict(g["plan"])
    query_plan = PlanTree.from_dict(g.get("query_plan", g["plan"]))
    return raw, plan, query_plan


def golden_script(spec: TaskSpec, lesioned: bool = False) -> str:
    """All subtask scripts of the refined plan, in order."""
    _, plan, _ = _plans(spec)
    steps = spec.golden["steps"]
    lesion = spec.golden.get("lesion") if lesioned else None
    parts = []
    for _, _, sub in flatten(plan):
        parts.append(lesion["wrong"] if lesion and lesion["subtask"] == sub else steps[sub])
    return "\n".join(p for p in parts if p)


def _subtask_pattern(sub: str, after: str = "") -> str:
    """Actor prompts for subtask ``sub`` (critic prompts name the subtask too)."""
    return "^" + re.escape(_header("actor.step/v1")) + ".*" + re.escape(f"CURRENT SUBTASK: {sub}\n{after}")


def _rules(spec: TaskSpec, lesioned: bool) -> list[ScriptRule]:
    raw, plan, query_plan = _plans(spec)
    g = spec.golden
    lesion = g.get("lesion") if lesioned else None
    rules = [
        ScriptRule("substring", _header("plan.extract/v1"), render_outline(raw)),
        ScriptRule("substring", _header("plan.refine/v1"), render_outline(plan)),
        ScriptRule("substring", _header("plan.query/v1"), render_outline(query_plan)),
        # the whole transcript as one subtask (planning disabled)
        ScriptRule("regex", _subtask_pattern(spec.transcript), golden_script(spec, lesioned)),
    ]
    for sub in dict.fromkeys(s for _, _, s in flatten(plan)):
        if sub not in g["steps"]:
            raise ValueError(f"task {spec.id}: no golden step for subtask {sub!r}")
        if lesion and lesion["subtask"] == sub:
            rules.append(ScriptRule("regex", _subtask_pattern(sub, "LAST CRITIQUE: success=false"), g["steps"][sub]))
            rules.append(ScriptRule("regex", _subtask_pattern(sub), lesion["wrong"]))
        else:
            rules.append(ScriptRule("regex", _subtask_pattern(sub), g["steps"][sub]))
    if lesion:
        rules.append(ScriptRule("substring", f"LAST ACTION:\n{lesion['wrong']}\nSCREEN CHANGES:", CRITIC_WRONG))
    rules.append(ScriptRule("substring", _header("critic.assess/v1"), CRITIC_OK))
    # screen-parsing tool selection, when an orchestrator is configured
    rules.append(ScriptRule("substring", _header("parser.tools/v1"), ", ".join(TOOLS)))
    return rules


def golden_backend(spec: TaskSpec) -> ScriptedBackend:
    return ScriptedBackend(_rules(spec, False), name=f"scripted:golden:{spec.id}")


def lesioned_backend(spec: TaskSpec) -> ScriptedBackend:
    """Golden backend with the task's lesion, if it declares one."""
    return ScriptedBackend(_rules(spec, True), name=f"scripted:lesioned:{spec.id}")
