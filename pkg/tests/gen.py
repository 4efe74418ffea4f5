"""Seeded random generators shared by the property tests.

Each function takes a ``random.Random`` so a failure can be reproduced
from its seed. ``hypothesis`` strategies wrap them via ``st.randoms``.
"""

from __future__ import annotations

import random
import string

from hypothesis import strategies as st

from acegui import action_dsl as dsl
from acegui import bridge
from acegui.gui_parser import ROLES, Element, Panel, UIDocument
from acegui.planner import Milestone, PlanTree
from acegui.sim_desktop import SymbolicRaster

# awkward characters for string literals
TRICKY = "'\"\\\n\t\r\x00\x1b\x7f,();=# é漢🙂 "
KEYS = sorted(dsl.KEY_NAMES)


def text(rng: random.Random, max_len: int = 12) -> str:
    pool = string.ascii_letters + string.digits + " " + TRICKY
    return "".join(rng.choice(pool) for _ in range(rng.randint(0, max_len)))


def _coord(rng: random.Random) -> int:
    return rng.choice([0, 1, rng.randint(0, 4000), 10**rng.randint(0, 12)])


def action(rng: random.Random, screen: tuple[int, int] | None = None, keys: list[str] | None = None):
    """One random action; with ``screen`` set, points stay on screen and keys are known names."""
    if screen:
        pt = (rng.randrange(screen[0]), rng.randrange(screen[1]))
    else:
        pt = (_coord(rng), _coord(rng))
    key_pool = keys or KEYS

    def key() -> str:
        return rng.choice(key_pool) if screen or rng.random() < 0.7 else text(rng, 6)

    kind = rng.randrange(13)
    if kind == 0:
        return dsl.MoveTo(*pt)
    if kind == 1:
        return dsl.Click(*pt)
    if kind == 2:
        return dsl.DoubleClick(*pt)
    if kind == 3:
        return dsl.RightClick(*pt)
    if kind == 4:
        return dsl.Write(text(rng))
    if kind == 5:
        return dsl.Hotkey(tuple(key() for _ in range(rng.randint(2, 4))))
    if kind == 6:
        return dsl.Scroll(rng.randint(-500, 500))
    if kind == 7:
        duration = rng.choice([0.0, 2.0, rng.random() * 10, rng.randint(0, 100) / 4, 1e-7, 3.5e20])
        return dsl.DragTo(pt[0], pt[1], duration)
    if kind == 8:
        return dsl.MouseDown()
    if kind == 9:
        return dsl.MouseUp()
    if kind == 10:
        return dsl.Press(key())
    if kind == 11:
        return dsl.KeyDown(key())
    return dsl.KeyUp(key())


def script(rng: random.Random, max_len: int = 8, screen: tuple[int, int] | None = None) -> list:
    return [action(rng, screen) for _ in range(rng.randint(0, max_len))]


def plan_tree(rng: random.Random) -> PlanTree:
    milestones = []
    for i in range(rng.randint(1, 6)):
        n = rng.choice([0, 1, 1, 2, 3, 5])
        subs = tuple(f"s{i}.{j} {rng.choice(['click', 'type', 'drag'])}" for j in range(n))
        milestones.append(Milestone(f"m{i}", subs))
    return PlanTree(tuple(milestones))


# small pools so that element keys collide and orders shuffle
_BBOXES = [(8 * x, 8 * y, 8 * w, 8) for x, y, w in [(1, 1, 3), (2, 1, 3), (1, 2, 5), (4, 4, 1), (0, 0, 2)]]


def element(rng: random.Random) -> Element:
    return Element(
        role=rng.choice(ROLES),
        bbox=rng.choice(_BBOXES),
        text=rng.choice(["", "OK", "Cancel", "Volume", "a b"]),
        icon_name=rng.choice([None, None, "gear", "file"]),
        state=rng.choice(["", "", "checked", "unchecked"]),
        confidence=rng.choice([1.0, 1.0, 0.5, 0.875]),
    )


def panel(rng: random.Random, name: str) -> Panel:
    return Panel(
        name=name,
        bbox=rng.choice([(0, 0, 640, 480), (80, 40, 320, 200), (8, 8, 16, 16)]),
        elements=tuple(element(rng) for _ in range(rng.randint(0, 6))),
        unclaimed=rng.choice([0, 0, 3, 17]),
    )


_NAMES = ["Desktop", "Volume", "Alarm", "Settings", "Files", "Editor"]


def document(rng: random.Random) -> UIDocument:
    names = rng.sample(_NAMES, rng.randint(0, 4))
    return UIDocument(tuple(panel(rng, n) for n in names))


def mutate(rng: random.Random, doc: UIDocument) -> UIDocument:
    """A document near ``doc``: panels and elements added, dropped, edited and reordered."""
    panels = list(doc.panels)
    for _ in range(rng.randint(0, 4)):
        op = rng.randrange(6)
        if op == 0 and panels:
            panels.pop(rng.randrange(len(panels)))
        elif op == 1:
            free = [n for n in _NAMES if n not in {p.name for p in panels}]
            if free:
                panels.insert(rng.randint(0, len(panels)), panel(rng, rng.choice(free)))
        elif op == 2:
            rng.shuffle(panels)
        elif panels:
            i = rng.randrange(len(panels))
            p = panels[i]
            els = list(p.elements)
            if op == 3:
                els.insert(rng.randint(0, len(els)), element(rng))
            elif op == 4 and els:
                j = rng.randrange(len(els))
                e = els[j]
                els[j] = Element(e.role, e.bbox, rng.choice(["", "OK", "x"]), e.icon_name,
                                 rng.choice(["", "checked"]), rng.choice([1.0, 0.25]))
            elif els:
                if rng.random() < 0.5:
                    els.pop(rng.randrange(len(els)))
                else:
                    rng.shuffle(els)
            panels[i] = Panel(p.name, rng.choice([p.bbox, (0, 0, 64, 64)]), tuple(els),
                              rng.choice([p.unclaimed, 5]))
    return UIDocument(tuple(panels))


TOKENS = ["a", "b", "Z", " ", "@f", "@g", "#desk", "#btn", "#win"]


def raster_pair(rng: random.Random, max_side: int = 24) -> tuple[SymbolicRaster, SymbolicRaster]:
    w, h = rng.randint(1, max_side), rng.randint(1, max_side)
    pool = TOKENS[: rng.randint(1, len(TOKENS))]
    a = [[rng.choice(pool) for _ in range(w)] for _ in range(h)]
    p = rng.random()
    b = [[rng.choice(pool) if rng.random() < p else t for t in row] for row in a]
    mk = lambda g: SymbolicRaster(w, h, 8, tuple(tuple(r) for r in g))  # noqa: E731
    return mk(a), mk(b)


def _json_value(rng: random.Random, depth: int = 0):
    kind = rng.randrange(7 if depth < 2 else 5)
    if kind == 0:
        return rng.randint(-(2**40), 2**40)
    if kind == 1:
        return rng.choice([0.5, -1.25, 1e-9, 3.0])
    if kind == 2:
        return text(rng)
    if kind == 3:
        return rng.choice([True, False, None])
    if kind == 4:
        return []
    if kind == 5:
        return [_json_value(rng, depth + 1) for _ in range(rng.randint(0, 3))]
    return {text(rng, 5): _json_value(rng, depth + 1) for _ in range(rng.randint(0, 3))}


def wire_message(rng: random.Random):
    kind = rng.randrange(8)
    if kind == 0:
        return bridge.Hello(text(rng, 3), (rng.randint(0, 5000), rng.randint(0, 5000)))
    if kind == 1:
        return bridge.Reset(text(rng))
    if kind == 2:
        return bridge.Observe()
    if kind == 3:
        meta = [_json_value(rng) for _ in range(rng.randint(0, 3))]
        raster = {text(rng, 4): _json_value(rng) for _ in range(rng.randint(0, 3))}
        return bridge.ObservationMsg(meta, raster, text(rng))
    if kind == 4:
        return bridge.Execute(dsl.render(script(rng)))
    if kind == 5:
        return bridge.ExecResultMsg({"results": [text(rng) for _ in range(3)], "tick": rng.randint(0, 99)}, text(rng))
    if kind == 6:
        return bridge.Error(rng.choice(["bad_script", "timeout", "unknown_task"]), text(rng))
    return bridge.Shutdown()


def seeded(fn, *args):
    """Hypothesis strategy drawing ``fn(rng, *args)`` from a reproducible Random."""
    return st.randoms(use_true_random=False).map(lambda rng: fn(rng, *args))
