from __future__ import annotations

import random

import pytest
from hypothesis import given, settings, strategies as st

import gen
from acegui import action_dsl as dsl
from acegui.bridge import observation_bytes
from acegui.sim_desktop import (
    EnvState, LocalEnv, OutOfBoundsError, SchemaError, execute, is_fill, load_task, observe,
)


def window(*children, wid="main", text="Main", bbox=(0, 0, 320, 240)):
    return {"id": wid, "kind": "window", "bbox": list(bbox), "text": text, "children": list(children)}


def state(*windows, **extra):
    return EnvState.from_dict({"screen": [320, 240], "windows": list(windows), **extra})


def test_volume_task_initial_setting(pack):
    s = load_task(pack.get("widget/volume_set"))
    assert s.settings["volume"] == 70


def test_repeated_loads_are_equal_and_independent(pack):
    spec = pack.get("office/center_title")
    a, b = load_task(spec), load_task(spec)
    assert a == b and a is not b
    a.settings["x"] = 1
    assert "x" not in b.settings


def test_blank_state():
    s = EnvState.from_dict({"screen": [64, 48], "windows": []})
    obs = observe(s)
    assert obs.metadata == ()
    assert all(is_fill(t) for row in obs.raster.cells for t in row)


def test_missing_icon_is_schema_error():
    with pytest.raises(SchemaError) as info:
        state(window({"id": "i", "kind": "icon", "bbox": [8, 8, 8, 8], "icon_id": "nope"}))
    assert "icon" in str(info.value)


def test_child_outside_parent_is_schema_error():
    with pytest.raises(SchemaError):
        state(window({"id": "b", "kind": "button", "bbox": [400, 8, 16, 8], "text": "X"}))


def test_one_window_metadata():
    obs = observe(state(window(text="Settings")))
    assert [m.name for m in obs.metadata] == ["Settings"]


def test_checkbox_click_toggles():
    s = state(window({"id": "cb", "kind": "checkbox", "bbox": [16, 16, 80, 8], "text": "Dark"}))
    s1, _ = execute(s, dsl.parse("click(20, 20)"))
    assert s1.find("cb").state.get("checked") is True
    s2, _ = execute(s1, dsl.parse("click(20, 20)"))
    assert not s2.find("cb").state.get("checked")
    assert s.find("cb").state.get("checked") is None  # input state untouched


def test_write_appends_to_focused_field():
    s = state(window({"id": "f", "kind": "text_field", "bbox": [16, 16, 160, 8], "text": "Say: "}))
    s, _ = execute(s, dsl.parse("click(20, 20)\nwrite('Hello, world!')"))
    assert s.focus == "f"
    assert s.find("f").text == "Say: Hello, world!"


def test_text_commit_on_enter():
    f = {"id": "f", "kind": "text_field", "bbox": [16, 16, 160, 8],
         "effects": [{"trigger": "text_commit", "op": "set_setting_from_text", "args": {"key": "name"}}]}
    s, _ = execute(state(window(f)), dsl.parse("click(20, 20); write('bob'); press('enter')"))
    assert s.settings["name"] == "bob"


def test_topmost_window_wins():
    below = window({"id": "b1", "kind": "checkbox", "bbox": [16, 16, 80, 8]}, wid="w1", text="Below")
    above = window({"id": "b2", "kind": "checkbox", "bbox": [16, 16, 80, 8]}, wid="w2", text="Above")
    s, _ = execute(state(below, above), dsl.parse("click(20, 20)"))
    assert s.find("b2").state.get("checked") is True
    assert not s.find("b1").state.get("checked")


def test_binding_when_unfocused():
    s = state(window(), settings={"n": 0},
              bindings={"ctrl+s": [{"trigger": "click", "op": "set_setting", "args": {"key": "n", "value": 1}}]})
    s1, _ = execute(s, dsl.parse("hotkey('ctrl', 's')"))
    assert s1.settings["n"] == 1


def test_click_on_nothing_only_moves_cursor():
    s = state(window())
    s1, _ = execute(s, dsl.parse("click(300, 200)"))
    assert s1.windows == s.windows and s1.settings == s.settings and s1.cursor == (300, 200)


def test_out_of_bounds_refused_before_mutation():
    s = state(window({"id": "cb", "kind": "checkbox", "bbox": [16, 16, 80, 8]}))
    with pytest.raises(OutOfBoundsError):
        execute(s, dsl.parse("click(20, 20); click(9999, 0)"))
    assert s.find("cb").state.get("checked") is None


def test_report_lists_each_action():
    s, report = execute(state(window()), dsl.parse("moveTo(1, 1); press('esc'); scroll(-200)"))
    assert len(report.results) == 3
    assert report.state_hash == s.state_hash()


def test_state_json_round_trip(pack):
    for spec in pack.tasks:
        s = load_task(spec)
        assert EnvState.from_json(s.to_json()) == s


@settings(max_examples=30)
@given(rng=st.randoms(use_true_random=False))
def test_execute_is_deterministic(rng, pack):
    spec = rng.choice(pack.tasks)
    s0 = load_task(spec)
    script = gen.script(rng, 10, s0.screen)
    a, ra = execute(load_task(spec), script)
    b, rb = execute(load_task(spec), script)
    assert a.state_hash() == b.state_hash() and ra == rb


def test_observe_is_pure(pack):
    rng = random.Random(3)
    env = LocalEnv(load_task(pack.get("design/paint_rect")))
    env.execute(gen.script(rng, 6, env.screen))
    before = env.state_hash()
    assert observation_bytes(env.observe()) == observation_bytes(env.observe())
    assert env.state_hash() == before
