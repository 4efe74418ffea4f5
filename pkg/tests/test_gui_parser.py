from __future__ import annotations

import itertools
import random

import numpy as np
from hypothesis import given, settings, strategies as st

import gen
from acegui.gui_parser import (
    DESKTOP_PANEL, NOISE_TOKEN, Element, IconTemplate, Panel, ParserConfig, UIDocument,
    apply_glyph_noise, deserialize, detect_widgets, extract_text, load_templates, match_icons,
    parse_gui, segment_panels, serialize,
)
from acegui.llm_backend import ScriptedBackend, ScriptRule
from acegui.sim_desktop import EnvState, Observation, PanelMeta, SymbolicRaster, load_task, observe
from acegui.sim_desktop.render import KEYFRAME, LINE, SCROLL, THUMB

BG = "#desk"


def raster(rows: list[list[str]]) -> SymbolicRaster:
    return SymbolicRaster(len(rows[0]), len(rows), 8, tuple(tuple(r) for r in rows))


def blank(w: int, h: int) -> list[list[str]]:
    return [[BG] * w for _ in range(h)]


def whole(r: SymbolicRaster) -> Panel:
    return Panel("all", (0, 0, r.width * 8, r.height * 8))


def test_segment_two_panels_and_desktop():
    meta = (PanelMeta("A", "window", (0, 0, 16, 16)), PanelMeta("B", "window", (32, 0, 16, 16)))
    panels = segment_panels(Observation(meta, SymbolicRaster.blank(8, 4, 8)))
    assert [p.name for p in panels] == ["A", "B", DESKTOP_PANEL]


def test_segment_empty_metadata():
    (p,) = segment_panels(Observation((), SymbolicRaster.blank(8, 4, 8)))
    assert p.name == DESKTOP_PANEL and p.bbox == (0, 0, 64, 32) and p.mask.all()


def test_overlapping_panels_partition_the_raster():
    meta = (PanelMeta("Back", "window", (0, 0, 48, 32)), PanelMeta("Front", "popup", (16, 8, 48, 32)))
    panels = segment_panels(Observation(meta, SymbolicRaster.blank(10, 6, 8)))
    masks = np.stack([p.mask for p in panels])
    assert (masks.sum(axis=0) == 1).all()  # every cell owned exactly once
    front = panels[1].mask
    assert front[1, 2] and not panels[0].mask[1, 2]  # overlap goes to the topmost


def test_text_run():
    rows = blank(10, 4)
    rows[2][3:7] = list("Save")
    (e,) = extract_text(raster(rows), whole(raster(rows)))
    assert e == Element("text", (24, 16, 32, 8), "Save")


def test_blank_panel_has_no_text():
    r = SymbolicRaster.blank(6, 3, 8)
    assert extract_text(r, whole(r)) == []


def _oracle_runs(grid) -> set[tuple[str, tuple[int, int, int, int]]]:
    """Independent run detection: group each row by 'is a single-character glyph'."""
    out = set()
    for r, row in enumerate(grid):
        c = 0
        for is_glyph, group in itertools.groupby(row, key=lambda t: len(t) == 1):
            n = len(list(group))
            if is_glyph:
                out.add(("".join(row[c:c + n]), (c * 8, r * 8, n * 8, 8)))
            c += n
    return out


def test_noise_matches_run_oracle(pack):
    obs = observe(load_task(pack.get("office/center_title")))
    noised = apply_glyph_noise(obs.raster, 0.1, 7)
    dropped = sum(t == NOISE_TOKEN for row in noised.cells for t in row)
    assert dropped > 0
    got = {(e.text, e.bbox) for e in extract_text(obs.raster, whole(obs.raster), 0.1, 7)}
    assert got == _oracle_runs([list(r) for r in noised.cells])


def test_noise_free_text_is_exact(pack):
    obs = observe(load_task(pack.get("office/center_title")))
    got = {(e.text, e.bbox) for e in extract_text(obs.raster, whole(obs.raster))}
    assert got == _oracle_runs([list(r) for r in obs.raster.cells])


def test_keyframe_clock_template(pack):
    s = EnvState.from_dict({
        "screen": [80, 40], "icons": pack.icons,
        "windows": [{"id": "w", "kind": "window", "bbox": [0, 0, 80, 40], "text": "T", "children": [
            {"id": "k", "kind": "icon", "bbox": [16, 16, 16, 16], "icon_id": "keyframe_clock"},
            {"id": "g", "kind": "icon", "bbox": [48, 16, 16, 8], "icon_id": "gear"},
        ]}],
    })
    r = observe(s).raster
    got = match_icons(r, whole(r), pack.templates)
    assert Element("icon", (16, 16, 16, 16), "keyframe_clock", "keyframe_clock") in got
    unnamed = [e for e in got if e.icon_name is None]
    assert len(unnamed) == 1 and unnamed[0].confidence == 0.5


def test_brute_force_template_scan(pack):
    """Every placement of a template pattern in the raster is reported as that icon."""
    templates = pack.templates
    rng = random.Random(0)
    rows = blank(20, 10)
    placed = []
    for t in templates:
        for _ in range(2):
            while True:
                c, r = rng.randrange(20 - len(t.pattern[0])), rng.randrange(10 - len(t.pattern))
                cells = [(r + i, c + j) for i in range(len(t.pattern)) for j in range(len(t.pattern[0]))]
                halo = {(a + da, b + db) for a, b in cells for da in (-1, 0, 1) for db in (-1, 0, 1)}
                if all(rows[a][b] == BG for a, b in halo if 0 <= a < 10 and 0 <= b < 20):
                    break
            for i, line in enumerate(t.pattern):
                for j, ch in enumerate(line):
                    rows[r + i][c + j] = "@" + ch
            placed.append((t.icon_name, (c * 8, r * 8, len(t.pattern[0]) * 8, len(t.pattern) * 8)))
    r = raster(rows)
    got = sorted((e.icon_name, e.bbox) for e in match_icons(r, whole(r), templates))
    assert got == sorted(placed)


def test_load_templates_from_mapping():
    assert load_templates({"b": ["xy"], "a": ["z"]}) == [IconTemplate("a", ("z",)), IconTemplate("b", ("xy",))]


def test_no_icons():
    r = SymbolicRaster.blank(5, 5, 8)
    assert match_icons(r, whole(r), [IconTemplate("x", ("ab",))]) == []


def test_right_edge_scrollbar():
    rows = blank(8, 6)
    for r in range(6):
        rows[r][7] = THUMB if r < 2 else SCROLL
    (e,) = detect_widgets(raster(rows), whole(raster(rows)))
    assert e.role == "scrollbar" and e.bbox == (56, 0, 8, 48) and e.state == "thumb=0-2/6"


def test_no_widget_runs():
    r = SymbolicRaster.blank(5, 5, 8)
    assert detect_widgets(r, whole(r)) == []


def test_timeline_fixture():
    # 12 x 6 timeline: scrollbar along the bottom, playhead line at column 5,
    # keyframe marks at columns 2 and 9, a two-cell-wide bar that is not a line
    rows = blank(12, 6)
    for c in range(12):
        rows[5][c] = SCROLL
    rows[5][0] = rows[5][1] = THUMB
    for r in range(0, 5):
        rows[r][5] = LINE
    rows[1][10] = rows[1][11] = rows[2][10] = rows[2][11] = rows[3][10] = LINE
    rows[2][2] = KEYFRAME
    rows[2][9] = KEYFRAME
    r = raster(rows)
    got = sorted(detect_widgets(r, whole(r)), key=Element.sort_key)
    assert got == sorted([
        Element("scrollbar", (0, 40, 96, 8), state="thumb=0-2/12"),
        Element("reference_line", (40, 0, 8, 40)),
        Element("object", (16, 16, 8, 8), "keyframe"),
        Element("object", (72, 16, 8, 8), "keyframe"),
    ], key=Element.sort_key)


def test_parse_gui_covers_every_content_cell(pack):
    for spec in pack.tasks:
        obs = observe(load_task(spec))
        doc = parse_gui(obs, spec.templates)
        assert sum(p.unclaimed for p in doc.panels) == 0, spec.id
        for p in doc.panels:
            px, py, pw, ph = p.bbox
            for e in p.elements:
                x, y, w, h = e.bbox
                assert px <= x and py <= y and x + w <= px + pw and y + h <= py + ph, (spec.id, e)


def test_parse_gui_is_deterministic(pack):
    obs = observe(load_task(pack.get("widget/alarm_set")))
    cfg = ParserConfig(noise_p=0.2, seed=5)
    assert parse_gui(obs, (), cfg) == parse_gui(obs, (), cfg)


def test_orchestrated_tools_subset(pack):
    obs = observe(load_task(pack.get("widget/volume_set")))
    llm = ScriptedBackend([ScriptRule("substring", "parser.tools/v1", "widgets, text")])
    doc = parse_gui(obs, (), ParserConfig(orchestrator=llm))
    assert doc == parse_gui(obs, (), ParserConfig(tools=("text", "widgets")))
    assert len(llm.calls) == len(doc.panels)


def test_serialize_empty_and_small():
    assert serialize(UIDocument()) == ""
    doc = UIDocument((Panel("P", (0, 0, 64, 64), (Element("button", (8, 8, 32, 8), "OK"),)),))
    assert serialize(doc) == "panel 'P' @ (0, 0, 64, 64)\n  button 'OK' @ (8, 8, 32, 8)"


def test_serialize_fixture_idempotent(pack):
    for spec in pack.tasks:
        text = serialize(parse_gui(observe(load_task(spec)), spec.templates))
        assert serialize(deserialize(text)) == text


@settings(max_examples=200)
@given(gen.seeded(gen.document))
def test_serialize_round_trip(doc):
    assert deserialize(serialize(doc)) == doc


@given(st.text(max_size=30))
def test_deserialize_never_crashes_unexpectedly(text):
    try:
        deserialize(text)
    except ValueError:
        pass
