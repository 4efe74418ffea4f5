from __future__ import annotations

import pytest

from acegui import actor
from acegui.action_dsl import Click, Press
from acegui.actor import ActionFormatError, AgentStep, BoundsError, HistoryItem, advance_subtask
from acegui.critic import Critique, first_critique
from acegui.gui_parser import UIDocument
from acegui.llm_backend import ScriptedBackend, ScriptRule
from acegui.planner import PlanCursor, PlanTree, start

DONE = Critique(True, "", True, "")
STAY = Critique(True, "", False, "not yet")
TREE5 = PlanTree.of(("A", ["a1", "a2"]), ("B", ["b1"]), ("C", ["c1", "c2"]))


def step(**kw):
    base = dict(prev_action=[], obs_doc=UIDocument(), subtask="click OK", milestone="Confirm",
                critique=first_critique(), history=[])
    base.update(kw)
    return AgentStep(**base)


def reply(text: str) -> ScriptedBackend:
    return ScriptedBackend([ScriptRule("substring", "actor.step/v1", text)])


def test_unfinished_stays():
    c = PlanCursor(0, 1)
    assert advance_subtask(c, STAY, TREE5) == c


def test_finished_at_last_leaf_is_done():
    assert advance_subtask(PlanCursor(2, 1), DONE, TREE5).done


def test_alternating_flags_trajectory():
    flags = [False, True, False, True, True, False, False, True, True]
    expected = [(0, 0), (0, 1), (0, 1), (1, 0), (2, 0), (2, 0), (2, 0), (2, 1), "done"]
    cur, got = start(TREE5), []
    for f in flags:
        cur = advance_subtask(cur, DONE if f else STAY, TREE5)
        got.append("done" if cur.done else (cur.milestone_idx, cur.subtask_idx))
    assert got == expected
    with pytest.raises(ValueError):
        advance_subtask(cur, DONE, TREE5)


def test_plain_reply():
    assert actor.next_action(step(), reply("click(10, 20)"), (1920, 1080)) == [Click(10, 20)]


def test_fenced_reply():
    assert actor.next_action(step(), reply("```python\nclick(10, 20)\n```"), (1920, 1080)) == [Click(10, 20)]


def test_out_of_bounds():
    with pytest.raises(BoundsError):
        actor.next_action(step(), reply("click(99999, 0)"), (1920, 1080))


def test_repair_then_fail():
    llm = ScriptedBackend([ScriptRule("substring", "### template:", "I would click OK")])
    with pytest.raises(ActionFormatError):
        actor.next_action(step(), llm, (100, 100))
    assert len(llm.calls) == 2 and "actor.repair/v1" in llm.calls[1].prompt


def test_repair_fixes_unknown_key():
    llm = ScriptedBackend([
        ScriptRule("substring", "actor.repair/v1", "press('enter')"),
        ScriptRule("substring", "actor.step/v1", "press('return')"),
    ])
    log: list = []
    assert actor.next_action(step(), llm, (100, 100), log) == [Press("enter")]
    assert [t for t, _, _ in log] == ["actor.step/v1", "actor.repair/v1"]


def test_prompt_carries_every_input():
    hist = [HistoryItem("open menu", (Click(1, 2),), STAY)]
    s = step(prev_action=[Click(5, 6)], critique=Critique(False, "missed", False, "again"), history=hist)
    p = actor.build_prompt(s, (640, 480))
    for needle in ["CURRENT MILESTONE: Confirm", "CURRENT SUBTASK: click OK", "click(5, 6)",
                   "success=false; finished=false; missed; again", "open menu", "640"]:
        assert needle in p


def test_history_window():
    hist = [HistoryItem(f"s{i}", (), STAY) for i in range(12)]
    s = step(history=hist)
    assert len(s.history) == actor.HISTORY_WINDOW and s.history[-1].subtask == "s11"
