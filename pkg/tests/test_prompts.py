from __future__ import annotations

import string

import pytest

from acegui import prompts


def test_all_templates_load():
    assert prompts.template_ids() == [
        "actor.repair/v1", "actor.step/v1", "critic.assess/v1", "critic.repair/v1", "parser.tools/v1",
        "plan.extract/v1", "plan.query/v1", "plan.refine/v1", "plan.repair/v1",
    ]


@pytest.mark.parametrize("tid", prompts.template_ids())
def test_header_survives_rendering(tid):
    tpl = prompts.get(tid)
    names = {m.group("named") or m.group("braced") for m in string.Template.pattern.finditer(tpl.text)} - {None}
    text = tpl.render(**{n: f"<{n}>" for n in names})
    assert text.startswith(f"### template: {tid}\n")
    assert all(f"<{n}>" in text for n in names)


def test_missing_field():
    with pytest.raises(KeyError):
        prompts.render("plan.extract/v1")


def test_unknown_template():
    with pytest.raises(KeyError):
        prompts.get("plan.extract/v9")


def test_dollar_in_values_is_literal():
    text = prompts.render("plan.query/v1", query="cost $5 ${x}")
    assert "cost $5 ${x}" in text
