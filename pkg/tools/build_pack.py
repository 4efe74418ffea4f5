"""Generate the bundled task pack under src/acegui/data/pack.

Every task is laid out here in screen cells (8 px each). For each task
the script

* writes the initial state, query, transcript and golden plan/steps,
* builds the goal by editing a copy of the initial state directly (never
  by running the golden steps) and stores its raster for pixel goals,
* checks that the golden backend solves the task, that the lesioned
  backend still solves it with the critic, and that a lesion really does
  break the run when the critic is bypassed.

Run from the repository root:  python3 tools/build_pack.py
"""

from __future__ import annotations

import json
import shutil
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from acegui import action_dsl as dsl  # noqa: E402
from acegui.eval_harness import (  # noqa: E402
    EpisodeConfig,
    golden_backend,
    lesioned_backend,
    load_pack,
    run_episode,
)
from acegui.sim_desktop import EnvState, render_raster  # noqa: E402

OUT = ROOT / "src" / "acegui" / "data" / "pack"
CP = 8
SCREEN = (640, 480)

ICONS = {
    "file": ["|^", "|_"],
    "folder": ["/-", "|_"],
    "keyframe_clock": ["<>", "()"],
    "gear": ["*o"],
}
# "gear" is drawn on screen but deliberately has no parser template
TEMPLATES = {k: v for k, v in ICONS.items() if k != "gear"}


# ---- layout helpers ----


def box(c, r, w, h):
    return [c * CP, r * CP, w * CP, h * CP]


def eff(trigger, op, target=None, **args):
    d = {"trigger": trigger, "op": op, "args": args}
    if target is not None:
        d["target"] = target
    return d


class Layout:
    """Widget factory that remembers every widget by id."""

    def __init__(self):
        self.by_id = {}

    def w(self, id, kind, rect, text="", children=(), effects=(), icon=None, **state):
        d = {"id": id, "kind": kind, "bbox": box(*rect)}
        if text:
            d["text"] = text
        if icon:
            d["icon_id"] = icon
        if state:
            d["state"] = state
        if effects:
            d["effects"] = list(effects)
        if children:
            d["children"] = list(children)
        self.by_id[id] = d
        return d

    def button(self, id, c, r, text, effects=(), icon=None):
        width = len(text) + 2 + (len(ICONS[icon][0]) + 1 if icon else 0)
        height = len(ICONS[icon]) if icon else 1
        return self.w(id, "button", (c, r, width, height), text, effects=effects, icon=icon)

    def center(self, id, dy=0):
        x, y, w, h = self.by_id[id]["bbox"]
        return x + w // 2, y + h // 2 - dy

    def click(self, id, dy=0):
        x, y = self.center(id, dy)
        return f"click({x}, {y})"

    def cell(self, id, c, r):
        """Pixel centre of cell (c, r) inside widget ``id``."""
        x, y, _, _ = self.by_id[id]["bbox"]
        return x + c * CP + CP // 2, y + r * CP + CP // 2


def state(windows, **extra):
    d = {"screen": list(SCREEN), "windows": windows}
    d.update(extra)
    return d


def plan(*milestones):
    return {"milestones": [{"text": t, "subtasks": list(s)} for t, s in milestones]}


def canon(script: str) -> str:
    return dsl.render(dsl.parse(script))


# ---- tasks ----


def paint_rect():
    L = Layout()
    label = L.w("brush_label", "label", (40, 3, 20, 1), "Brush: none")
    win = L.w("paint", "window", (0, 0, 80, 60), "Paint", children=[
        L.w("tools", "panel", (0, 1, 80, 4), "Tools", children=[
            L.button("red", 2, 3, "Red", [eff("click", "set_state", key="brush", value="red", widget="canvas"),
                                          eff("click", "set_text", text="Brush: red", widget="brush_label")]),
            L.button("blue", 10, 3, "Blue", [eff("click", "set_state", key="brush", value="blue", widget="canvas"),
                                             eff("click", "set_text", text="Brush: blue", widget="brush_label")]),
            label,
        ]),
        L.w("canvas", "canvas", (4, 8, 60, 40)),
    ])
    x0, y0 = L.cell("canvas", 2, 2)
    x1, y1 = L.cell("canvas", 13, 9)
    steps = {
        "click the Red button": L.click("red"),
        "drag from the top-left corner of the box to its bottom-right corner":
            f"moveTo({x0}, {y0})\ndragTo({x1}, {y1}, duration=1)",
    }

    def goal(s: EnvState):
        cv = s.find("canvas")
        cv.state["brush"] = "red"
        for c in range(2, 14):
            for r in range(2, 10):
                cv.state[f"px:{c},{r}"] = "red"
        s.find("brush_label").text = "Brush: red"

    return {
        "category": "Design",
        "query": "Draw a red box in the top-left part of the canvas, 12 cells wide and 8 cells tall.",
        "transcript": ("Today we draw a simple box. First pick blue from the toolbar.\n"
                       "Then press on the canvas and drag to the opposite corner to fill the box."),
        "initial_state": state([win]),
        "raw_plan": plan(("Pick a colour", ["click the Blue button"]),
                         ("Draw the box", ["drag from the top-left corner of the box to its bottom-right corner"])),
        "plan": plan(("Pick a colour", ["click the Red button"]),
                     ("Draw the box", ["drag from the top-left corner of the box to its bottom-right corner"])),
        "steps": steps,
        "lesion": {"subtask": "click the Red button", "wrong": L.click("brush_label")},
        "goal": {"kind": "pixel_sim", "region": [4, 8, 34, 28]},
        "goal_fn": goal,
    }


def keyframe():
    L = Layout()
    win = L.w("anim", "window", (0, 0, 80, 60), "Animator", children=[
        L.w("toolbar", "panel", (0, 1, 80, 5), "Toolbar", children=[
            L.button("add_key", 2, 3, "Add Keyframe", [eff("click", "add_keyframe", widget="timeline")],
                     icon="keyframe_clock"),
        ]),
        L.w("preview", "canvas", (4, 8, 72, 36)),
        L.w("timeline", "canvas", (4, 48, 72, 8), mode="timeline", playhead=0),
    ])
    steps = {
        "click frame 10 on the timeline": "click({}, {})".format(*L.cell("timeline", 10, 4)),
        "click the Add Keyframe button": L.click("add_key"),
        "click frame 30 on the timeline": "click({}, {})".format(*L.cell("timeline", 30, 4)),
        "click the Add Keyframe button again": L.click("add_key"),
    }

    def goal(s: EnvState):
        tl = s.find("timeline")
        tl.state["kf:10"] = True
        tl.state["kf:30"] = True
        tl.state["playhead"] = 30

    return {
        "category": "Design",
        "query": "Add keyframes at frame 10 and frame 30 of the timeline.",
        "transcript": ("Move the playhead to frame 5 and press Add Keyframe.\n"
                       "Then move it to frame 20 and add a second keyframe."),
        "initial_state": state([win]),
        "threshold": 0.99,
        "raw_plan": plan(("First keyframe", ["click frame 5 on the timeline", "click the Add Keyframe button"]),
                         ("Second keyframe", ["click frame 20 on the timeline", "click the Add Keyframe button again"])),
        "plan": plan(("First keyframe", ["click frame 10 on the timeline", "click the Add Keyframe button"]),
                     ("Second keyframe", ["click frame 30 on the timeline", "click the Add Keyframe button again"])),
        "steps": steps,
        "lesion": {"subtask": "click frame 30 on the timeline",
                   "wrong": "click({}, {})".format(*L.cell("timeline", 3, 4))},
        "goal": {"kind": "pixel_sim", "region": [4, 48, 76, 56]},
        "goal_fn": goal,
    }


def _doc_window(L: Layout, title_text: str, heading_state: dict):
    return L.w("writer", "window", (0, 0, 80, 60), "Writer", children=[
        L.w("ribbon", "panel", (0, 1, 80, 4), "Home", children=[
            L.button("bold", 2, 3, "Bold", [eff("click", "set_state", key="bold", value=True, widget="title")]),
            L.button("left", 10, 3, "Left", [eff("click", "set_state", key="align", value="left", widget="title")]),
            L.button("center", 18, 3, "Center",
                     [eff("click", "set_state", key="align", value="center", widget="title")]),
            L.button("right", 28, 3, "Right", [eff("click", "set_state", key="align", value="right", widget="title")]),
        ]),
        L.w("page", "panel", (2, 6, 76, 52), "Page", children=[
            L.w("title", "text_field", (4, 8, 72, 1), title_text, **heading_state),
            L.w("body1", "label", (4, 12, 60, 1), "Sales grew in every region this quarter."),
            L.w("body2", "label", (4, 14, 60, 1), "The next report is due in four weeks."),
        ]),
    ])


def center_title():
    L = Layout()
    win = _doc_window(L, "", {})
    steps = {
        "click the title box": L.click("title"),
        "type TaskPilot": "write('TaskPilot')",
        "click the Center button": L.click("center"),
    }

    def goal(s: EnvState):
        t = s.find("title")
        t.text = "TaskPilot"
        t.state["align"] = "center"

    return {
        "category": "Office",
        "query": "Type TaskPilot instead as the title and center it.",
        "transcript": "Click into the title box and type My Report.\nThen center the title with the Center button.",
        "initial_state": state([win]),
        "raw_plan": plan(("Write the title", ["click the title box", "type My Report"]),
                         ("Format the title", ["click the Center button"])),
        "plan": plan(("Write the title", ["click the title box", "type TaskPilot"]),
                     ("Format the title", ["click the Center button"])),
        "steps": steps,
        "lesion": {"subtask": "click the Center button", "wrong": L.click("right")},
        "goal": {"kind": "pixel_sim", "region": [4, 8, 76, 9]},
        "goal_fn": goal,
    }


def bold_heading():
    L = Layout()
    win = _doc_window(L, "Quarterly results", {})
    steps = {
        "click the title": L.click("title"),
        "select all of its text": "hotkey('ctrl', 'a')",
        "click the Bold button": L.click("bold"),
    }

    def goal(s: EnvState):
        s.find("title").state["bold"] = True

    return {
        "category": "Office",
        "query": "Make the document title bold.",
        "transcript": ("To emphasise a heading, click it, select the whole line with control A,\n"
                       "and press the Bold button in the Home ribbon. Bold text stands out."),
        "initial_state": state([win]),
        "raw_plan": plan(("Select the heading", ["click the title", "select all of its text"]),
                         ("Apply bold", ["click the Bold button"]),
                         ("Admire the result", [])),
        "plan": plan(("Select the heading", ["click the title", "select all of its text"]),
                     ("Apply bold", ["click the Bold button"])),
        "steps": steps,
        "goal": {"kind": "pixel_sim", "region": [0, 1, 80, 20]},
        "goal_fn": goal,
    }


def volume_set():
    L = Layout()
    level = [eff("click", "set_text_from_setting", key="volume", widget="level", fmt="Level: {}")]
    win = L.w("mixer", "window", (0, 0, 80, 60), "Sound", children=[
        L.w("vol_panel", "panel", (10, 10, 40, 10), "Volume", children=[
            L.w("level", "label", (12, 13, 12, 1), "Level: 70"),
            L.button("minus", 12, 16, "-", [eff("click", "add_setting", key="volume", delta=-10, min=0)] + level),
            L.button("plus", 18, 16, "+", [eff("click", "add_setting", key="volume", delta=10, max=100)] + level),
        ]),
        L.w("out_panel", "panel", (10, 24, 40, 8), "Output", children=[
            L.w("device", "label", (12, 27, 30, 1), "Speakers (built-in)"),
        ]),
    ])
    steps = {"click the minus button four times": "\n".join([L.click("minus")] * 4)}

    def goal(s: EnvState):
        s.settings["volume"] = 30
        s.find("level").text = "Level: 30"

    return {
        "category": "Widget",
        "query": "Set the volume to 30.",
        "transcript": "Each click on minus lowers the volume by ten.\nClick minus twice to go from 70 down to 50.",
        "initial_state": state([win], settings={"volume": 70}),
        "raw_plan": plan(("Lower the volume", ["click the minus button twice"])),
        "plan": plan(("Lower the volume", ["click the minus button four times"])),
        "steps": steps,
        "lesion": {"subtask": "click the minus button four times", "wrong": L.click("level")},
        "goal": {"kind": "region_eq", "use_metadata_region": True, "panel": "Volume"},
        "goal_fn": goal,
    }


def alarm_set():
    L = Layout()
    win = L.w("clock", "window", (0, 0, 80, 60), "Clock", children=[
        L.w("alarm_panel", "panel", (6, 6, 50, 16), "Alarm", children=[
            L.w("time", "text_field", (8, 9, 12, 1), "07:00"),
            L.button("set", 22, 9, "Set", [
                eff("click", "set_setting_from_text", key="alarm", widget="time"),
                eff("click", "set_text_from_setting", key="alarm", widget="alarm_label", fmt="Alarm: {}"),
            ]),
            L.w("alarm_label", "label", (8, 12, 20, 1), "Alarm: 07:00"),
            L.w("enabled", "checkbox", (8, 15, 12, 1), "Enabled",
                effects=[eff("toggle", "set_setting_from_state", key="alarm_on", state_key="checked")]),
        ]),
    ])
    steps = {
        "select the time in the alarm box": L.click("time") + "\nhotkey('ctrl', 'a')",
        "type the new time": "write('06:30')",
        "click Set": L.click("set"),
        "tick the Enabled box": L.click("enabled"),
    }

    def goal(s: EnvState):
        s.settings["alarm"] = "06:30"
        s.settings["alarm_on"] = True
        s.find("time").text = "06:30"
        s.find("alarm_label").text = "Alarm: 06:30"
        s.find("enabled").state["checked"] = True

    return {
        "category": "Widget",
        "query": "Set an alarm for 06:30 and turn it on.",
        "transcript": ("Select the time in the alarm box and type 07:15.\n"
                       "Press Set to save it, then tick Enabled so the alarm rings."),
        "initial_state": state([win], settings={"alarm": "07:00", "alarm_on": False}),
        "raw_plan": plan(("Change the time", ["select the time in the alarm box", "type the new time", "click Set"]),
                         ("Turn the alarm on", ["tick the Enabled box"])),
        "plan": plan(("Change the time", ["select the time in the alarm box", "type the new time", "click Set"]),
                     ("Turn the alarm on", ["tick the Enabled box"])),
        "steps": steps,
        "lesion": {"subtask": "tick the Enabled box", "wrong": L.click("alarm_label")},
        "goal": {"kind": "region_eq", "use_metadata_region": True, "panel": "Alarm"},
        "goal_fn": goal,
    }


def dark_mode():
    L = Layout()
    win = L.w("settings", "window", (0, 0, 80, 60), "Settings", children=[
        L.w("nav", "panel", (0, 1, 20, 59), "Navigation", children=[
            L.w("nav_display", "menu_item", (1, 3, 18, 1), "Display", effects=[
                eff("click", "show", widget="display_page"), eff("click", "hide", widget="colors_page")]),
            L.w("nav_personal", "menu_item", (1, 5, 18, 1), "Personalization", effects=[
                eff("click", "show", widget="colors_page"), eff("click", "hide", widget="display_page")]),
        ]),
        L.w("display_page", "panel", (22, 2, 56, 30), "Display", children=[
            L.w("res", "label", (24, 5, 30, 1), "Resolution: 1920 x 1080"),
        ]),
        L.w("colors_page", "panel", (22, 2, 56, 30), "Colors", visible=False, children=[
            L.w("dark", "checkbox", (24, 5, 20, 1), "Dark mode",
                effects=[eff("toggle", "set_setting_from_state", key="dark_mode", state_key="checked")]),
        ]),
    ])
    steps = {
        "open Personalization": L.click("nav_personal"),
        "tick Dark mode": L.click("dark"),
    }
    return {
        "category": "SysSet",
        "query": "Switch the system to dark mode.",
        "transcript": "Open Personalization in the settings sidebar.\nUnder Colors, tick the dark mode box.",
        "initial_state": state([win], settings={"dark_mode": False}),
        "raw_plan": plan(("Find the colour settings", ["open Personalization"]), ("Change the theme", ["tick Dark mode"])),
        "plan": plan(("Find the colour settings", ["open Personalization"]), ("Change the theme", ["tick Dark mode"])),
        "steps": steps,
        "lesion": {"subtask": "open Personalization", "wrong": L.click("nav_display")},
        "goal": {"kind": "predicate", "assertions": [{"path": "settings.dark_mode", "op": "==", "value": True}]},
    }


def display_scale():
    L = Layout()
    scales = [100, 110, 125, 150, 175, 200]
    # option rows sit 6 cells apart in content coordinates, below the fold after 125%
    options = [
        L.w(f"scale_{v}", "menu_item", (26, 12 + 6 * i, 12, 1), f"{v}%",
            effects=[eff("click", "set_setting", key="scale_pending", value=v),
                     eff("click", "set_text", text=f"Selected: {v}%", widget="selected")])
        for i, v in enumerate(scales)
    ]
    win = L.w("settings", "window", (0, 0, 80, 60), "Settings", children=[
        L.w("display_page", "panel", (2, 2, 76, 56), "Display", children=[
            L.w("scale_title", "label", (4, 4, 30, 1), "Scale and layout"),
            L.w("selected", "label", (4, 6, 30, 1), "Selected: 100%"),
            L.w("scale_list", "scroll_area", (24, 10, 20, 16), max_offset=160, scroll_offset=0, children=options),
            L.button("apply", 4, 30, "Apply", [eff("click", "set_setting", key="applied", value=True),
                                               eff("click", "set_text", text="Scale applied", widget="apply_ok")]),
            L.w("apply_ok", "label", (14, 30, 20, 1), ""),
        ]),
    ])
    # after scrolling down by 20 cells the 150% row (content row 30) shows at screen row 10
    x, y = L.center("scale_150", dy=20 * CP)
    sx, sy = L.center("scale_list")
    steps = {
        "scroll down the scale list": f"moveTo({sx}, {sy})\nscroll(-20)",
        "click 150%": f"click({x}, {y})",
        "click Apply": L.click("apply"),
    }
    return {
        "category": "SysSet",
        "query": "Change the display scale to 150% and apply it.",
        "transcript": ("Scroll the Scale list until you see 125 percent, click it,\n"
                       "and then click Apply to use the new scale."),
        "initial_state": state([win], settings={"scale_pending": 100, "applied": False}),
        "raw_plan": plan(("Pick a scale", ["scroll down the scale list", "click 125%"]), ("Confirm", ["click Apply"])),
        "plan": plan(("Pick a scale", ["scroll down the scale list", "click 150%"]), ("Confirm", ["click Apply"])),
        "steps": steps,
        "goal": {"kind": "predicate", "assertions": [
            {"path": "settings.scale_pending", "op": "==", "value": 150},
            {"path": "settings.applied", "op": "==", "value": True},
        ]},
    }


def _explorer(L: Layout, extra_icons=(), effects_for=None):
    effects_for = effects_for or {}
    icons = [
        L.w("ic_report", "icon", (4, 6, 16, 2), "report.txt", icon="file", effects=effects_for.get("ic_report", ())),
        L.w("ic_temp", "icon", (4, 10, 16, 2), "temp.log", icon="file", effects=effects_for.get("ic_temp", ())),
        L.w("ic_notes", "icon", (4, 14, 16, 2), "notes.txt", icon="file", effects=effects_for.get("ic_notes", ())),
        L.w("ic_archive", "icon", (30, 6, 16, 2), "Archive", icon="folder"),
        L.w("ic_settings", "icon", (30, 10, 16, 1), "settings", icon="gear"),
    ] + list(extra_icons)
    return L.w("explorer", "window", (0, 0, 80, 60), "Explorer", children=[
        L.w("files", "panel", (2, 3, 76, 40), "Desktop", children=icons),
        L.w("status", "label", (2, 45, 40, 1), "5 items"),
    ])


VFS = {"Desktop": {"report.txt": "Q3 numbers", "temp.log": "cache", "notes.txt": "todo", "Archive": {}}}


def move_report():
    L = Layout()
    win = _explorer(L, effects_for={"ic_report": [
        eff("drag_drop", "move_file", target="ic_archive", src="/Desktop/report.txt", dst="/Desktop/Archive"),
        eff("drag_drop", "hide", target="ic_archive"),
    ]})
    rx, ry = L.center("ic_report")
    ax, ay = L.center("ic_archive")
    steps = {
        "select report.txt": L.click("ic_report"),
        "drag report.txt onto the Archive folder": f"moveTo({rx}, {ry})\ndragTo({ax}, {ay}, duration=1)",
    }
    return {
        "category": "FileMani",
        "query": "Move report.txt into the Archive folder.",
        "transcript": "Click the file you want to file away.\nDrag it onto the folder and let go.",
        "initial_state": state([win], vfs=VFS),
        "raw_plan": plan(("Pick the file", ["select report.txt"]),
                         ("Move it", ["drag report.txt onto the Archive folder"])),
        "plan": plan(("Pick the file", ["select report.txt"]),
                     ("Move it", ["drag report.txt onto the Archive folder"])),
        "steps": steps,
        "lesion": {"subtask": "drag report.txt onto the Archive folder",
                   "wrong": f"moveTo({rx}, {ry})\ndragTo({ax + 160}, {ay + 200}, duration=1)"},
        "goal": {"kind": "predicate", "assertions": [
            {"path": "vfs./Desktop/Archive/report.txt", "op": "==", "value": "Q3 numbers"},
            {"path": "vfs./Desktop/report.txt", "op": "absent"},
        ]},
    }


def delete_temp():
    L = Layout()
    explorer = _explorer(L, effects_for={"ic_temp": [eff("right_click", "open_window", window="ctx")]})
    popup = L.w("ctx", "window", (22, 12, 16, 8), "temp.log", visible=False, popup=True, children=[
        L.w("ctx_open", "menu_item", (23, 14, 14, 1), "Open"),
        L.w("ctx_delete", "menu_item", (23, 16, 14, 1), "Delete", effects=[
            eff("click", "delete_file", path="/Desktop/temp.log"),
            eff("click", "hide", widget="ic_temp"),
            eff("click", "close_window", window="ctx"),
        ]),
        L.w("ctx_cancel", "menu_item", (23, 18, 14, 1), "Cancel", effects=[eff("click", "close_window", window="ctx")]),
    ])
    tx, ty = L.center("ic_temp")
    steps = {
        "right-click temp.log": f"rightClick({tx}, {ty})",
        "choose Delete": L.click("ctx_delete"),
    }
    return {
        "category": "FileMani",
        "query": "Delete temp.log from the desktop and keep the other files.",
        "transcript": "Right click the file you no longer need.\nPick Delete from the menu that pops up.",
        "initial_state": state([explorer, popup], vfs=VFS),
        "raw_plan": plan(("Open the file menu", ["right-click temp.log"]), ("Delete it", ["choose Delete"])),
        "plan": plan(("Open the file menu", ["right-click temp.log"]), ("Delete it", ["choose Delete"])),
        "steps": steps,
        "lesion": {"subtask": "choose Delete", "wrong": "click({}, {})".format(*L.cell("ctx", 1, 0))},
        "goal": {"kind": "predicate", "assertions": [
            {"path": "vfs./Desktop/temp.log", "op": "absent"},
            {"path": "vfs./Desktop/notes.txt", "op": "exists"},
            {"path": "vfs./Desktop/report.txt", "op": "exists"},
        ]},
    }


def new_folder():
    L = Layout()
    new_icon = L.w("ic_new", "icon", (30, 14, 16, 2), "New folder", icon="folder", visible=False)
    win = _explorer(L, extra_icons=[new_icon], effects_for={"ic_notes": [
        eff("drag_drop", "move_file", target="ic_new", src="/Desktop/notes.txt", dst="/Desktop/New folder"),
        eff("drag_drop", "hide", target="ic_new"),
    ]})
    nx, ny = L.center("ic_notes")
    fx, fy = L.center("ic_new")
    steps = {
        "press ctrl+shift+n": "hotkey('ctrl', 'shift', 'n')",
        "drag notes.txt onto New folder": f"moveTo({nx}, {ny})\ndragTo({fx}, {fy}, duration=1)",
    }
    return {
        "category": "FileMani",
        "query": "Make a new folder on the desktop and put notes.txt in it.",
        "transcript": ("Press control shift N to create a folder.\n"
                       "Then drag the file you want onto the new folder."),
        "initial_state": state([win], vfs=VFS, bindings={"ctrl+shift+n": [
            eff("click", "create_folder", path="/Desktop/New folder"),
            eff("click", "show", widget="ic_new"),
        ]}),
        "raw_plan": plan(("Create the folder", ["press ctrl+shift+n"]),
                         ("File the notes", ["drag notes.txt onto New folder"])),
        "plan": plan(("Create the folder", ["press ctrl+shift+n"]),
                     ("File the notes", ["drag notes.txt onto New folder"])),
        "steps": steps,
        "goal": {"kind": "predicate", "assertions": [
            {"path": "vfs./Desktop/New folder/notes.txt", "op": "exists"},
            {"path": "vfs./Desktop/notes.txt", "op": "absent"},
        ]},
    }


TASKS = {
    "design/paint_rect": paint_rect,
    "design/keyframe": keyframe,
    "office/center_title": center_title,
    "office/bold_heading": bold_heading,
    "widget/volume_set": volume_set,
    "widget/alarm_set": alarm_set,
    "sysset/dark_mode": dark_mode,
    "sysset/display_scale": display_scale,
    "filemani/move_report": move_report,
    "filemani/delete_temp": delete_temp,
    "filemani/new_folder": new_folder,
}


def _dump(path: Path, data) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=1, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")


def build() -> None:
    if OUT.exists():
        shutil.rmtree(OUT)
    _dump(OUT / "pack.json", {"name": "bundled", "icons": ICONS, "templates": TEMPLATES})
    for task_id, make in TASKS.items():
        t = make()
        golden = {
            "raw_plan": t["raw_plan"],
            "plan": t["plan"],
            "steps": {k: canon(v) for k, v in t["steps"].items()},
        }
        if "lesion" in t:
            golden["lesion"] = {"subtask": t["lesion"]["subtask"], "wrong": canon(t["lesion"]["wrong"])}
        goal = dict(t["goal"])
        if goal["kind"] != "predicate":
            s = EnvState.from_dict({**t["initial_state"], "icons": ICONS})
            t["goal_fn"](s)
            name = task_id.replace("/", "__") + ".json"
            _dump(OUT / "goldens" / name, render_raster(s).to_dict())
            goal["golden"] = name
        doc = {
            "category": t["category"],
            "query": t["query"],
            "transcript": t["transcript"],
            "initial_state": t["initial_state"],
            "goal": goal,
            "golden": golden,
        }
        if "threshold" in t:
            doc["threshold"] = t["threshold"]
        _dump(OUT / "tasks" / f"{task_id}.json", doc)


def verify() -> int:
    pack = load_pack(OUT)
    bad = 0
    for spec in pack.tasks:
        checks = [
            ("golden/full", golden_backend, None, True),
            ("golden/no_planner", golden_backend, "no_planner", True),
            ("golden/no_critic", golden_backend, "no_critic", True),
            ("golden/no_transcript", golden_backend, "no_transcript", True),
            ("lesioned/full", lesioned_backend, None, True),
        ]
        if spec.golden.get("lesion"):
            checks += [("lesioned/no_critic", lesioned_backend, "no_critic", False),
                       ("lesioned/no_planner", lesioned_backend, "no_planner", False)]
        for label, factory, ablation, expect in checks:
            trace = run_episode(spec, factory(spec), config=EpisodeConfig(ablation=ablation))
            if trace.success != expect:
                bad += 1
                print(f"FAIL {spec.id} {label}: {trace.outcome}")
    print(f"{len(pack.tasks)} tasks, {bad} problem(s)")
    return bad


if __name__ == "__main__":
    build()
    sys.exit(1 if verify() else 0)
