from __future__ import annotations

import pytest
from hypothesis import given

import gen
from acegui import planner
from acegui.llm_backend import ScriptedBackend, ScriptRule
from acegui.planner import (
    AlreadyDone, Milestone, PlanCursor, PlanFormatError, PlanTree, flatten, next_leaf, parent,
    parse_outline, render_outline, start, subtask,
)

TREE = PlanTree((Milestone("Open panel", ("s11", "s12")), Milestone("Export", ("s21",))))


def backend(*replies: str) -> ScriptedBackend:
    rules = [ScriptRule("substring", "### template:", r, max_uses=1) for r in replies]
    return ScriptedBackend(rules)


def test_extract_outline():
    llm = backend("1. Open panel\n a. click menu\n2. Export\n a. press hotkey")
    tree = planner.extract_raw_plan("open the panel, then export", llm)
    assert [m.text for m in tree.milestones] == ["Open panel", "Export"]
    assert [len(m.subtasks) for m in tree.milestones] == [1, 1]
    assert "plan.extract/v1" in llm.calls[0].prompt


def test_empty_transcript():
    with pytest.raises(ValueError):
        planner.extract_raw_plan("  ", backend())


def test_prose_twice_is_format_error():
    llm = backend("Sure! First you open it.", "I think you should export.")
    with pytest.raises(PlanFormatError):
        planner.extract_raw_plan("x", llm)
    assert len(llm.calls) == 2 and "plan.repair/v1" in llm.calls[1].prompt


def test_repair_succeeds():
    llm = backend("no outline here", "1. Only\n  a. step")
    log: list = []
    tree = planner.extract_raw_plan("x", llm, log)
    assert tree.leaf_count == 1 and [t for t, _, _ in log] == ["plan.extract/v1", "plan.repair/v1"]


def test_refine_takes_query():
    raw = PlanTree.of(("Type title", ["type Hello"]))
    llm = backend("1. Type title\n  a. type TaskPilot")
    refined = planner.refine_plan(raw, "type TaskPilot instead", llm)
    assert "TaskPilot" in refined.milestones[0].subtasks[0]
    assert "type TaskPilot instead" in llm.calls[0].prompt


def test_refine_unchanged():
    llm = backend(render_outline(TREE))
    assert planner.refine_plan(TREE, "same", llm) == TREE


def test_milestone_without_subtasks_gets_itself():
    tree = parse_outline("1. Admire the result\n2. Save\n  a. press ctrl+s")
    assert tree.milestones[0].subtasks == ("Admire the result",)


@pytest.mark.parametrize("text", [
    "", "1. A\n  b. skipped a", "2. starts at two", "1. A\n3. B", "  a. orphan", "1. A\nstray prose",
])
def test_outline_rejects(text):
    with pytest.raises(PlanFormatError):
        parse_outline(text)


def test_next_leaf_examples():
    assert next_leaf(TREE, PlanCursor(0, 0)) == PlanCursor(0, 1)
    assert next_leaf(TREE, PlanCursor(0, 1)) == PlanCursor(1, 0)
    assert next_leaf(TREE, PlanCursor(1, 0)).done


def test_parent_examples():
    assert parent(TREE, PlanCursor(1, 0)) == "Export"
    assert parent(TREE, PlanCursor(0, 1)) == "Open panel"
    with pytest.raises(AlreadyDone):
        parent(TREE, PlanCursor(1, 0, done=True))
    with pytest.raises(AlreadyDone):
        next_leaf(TREE, PlanCursor(0, 0, done=True))


def test_tree_invariants():
    with pytest.raises(ValueError):
        PlanTree(())
    with pytest.raises(ValueError):
        Milestone("", ("x",))


def walk(tree):
    cur, seen = start(tree), []
    while not cur.done:
        seen.append((cur.milestone_idx, cur.subtask_idx, subtask(tree, cur)))
        cur = next_leaf(tree, cur)
    return seen


@given(gen.seeded(gen.plan_tree))
def test_traversal_matches_flatten(tree):
    assert walk(tree) == flatten(tree)
    assert len(flatten(tree)) == sum(len(m.subtasks) for m in tree.milestones)


@given(gen.seeded(gen.plan_tree))
def test_parent_changes_only_at_milestone_boundaries(tree):
    visits = walk(tree)
    for (i, j, _), (k, l, _) in zip(visits, visits[1:]):
        assert (i == k) == (l == j + 1)


@given(gen.seeded(gen.plan_tree))
def test_outline_round_trip(tree):
    assert parse_outline(render_outline(tree)) == tree
    assert PlanTree.from_dict(tree.to_dict()) == tree
