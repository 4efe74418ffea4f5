"""Deterministic simulated desktop.

>>> from acegui.sim_desktop import EnvState, execute, observe
>>> state = EnvState(screen=(64, 48))
>>> observe(state).metadata
()
"""

from __future__ import annotations

from typing import Any, Mapping

from .. import action_dsl as dsl
from .engine import ExecReport, OutOfBoundsError, execute, normalize_combo
from .render import (
    Observation,
    PanelMeta,
    SymbolicRaster,
    is_fill,
    is_glyph,
    is_icon,
    observe,
    panel_metadata,
    render_raster,
)
from .state import EFFECT_OPS, WIDGET_KINDS, Effect, EnvState, SchemaError, Widget

__all__ = [
    "EFFECT_OPS", "WIDGET_KINDS", "Effect", "EnvState", "ExecReport", "LocalEnv",
    "Observation", "OutOfBoundsError", "PanelMeta", "SchemaError", "SymbolicRaster",
    "Widget", "execute", "is_fill", "is_glyph", "is_icon", "load_task",
    "normalize_combo", "observe", "panel_metadata", "render_raster",
]


def load_task(task_spec: Any) -> EnvState:
    """Initial state of a task.

    Accepts a :class:`~acegui.eval_harness.tasks.TaskSpec` (anything with an
    ``initial_state`` mapping) or the state mapping itself. Repeated loads
    return equal, independent states.
    """
    if isinstance(task_spec, Mapping):
        return EnvState.from_dict(task_spec, "initial_state")
    return EnvState.from_dict(task_spec.initial_state, "initial_state")


class LocalEnv:
    """In-process environment with the same surface as the bridge client."""

    def __init__(self, state: EnvState):
        self.state = state

    @property
    def screen(self) -> tuple[int, int]:
        return self.state.screen

    def observe(self) -> Observation:
        return observe(self.state)

    def execute(self, script) -> ExecReport:
        if isinstance(script, str):
            script = dsl.parse(script)
        self.state, report = execute(self.state, script)
        return report

    def state_hash(self) -> str:
        return self.state.state_hash()

    def final_state(self) -> EnvState:
        return self.state

    def close(self) -> None:
        pass
