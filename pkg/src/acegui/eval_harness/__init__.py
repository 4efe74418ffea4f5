"""Task packs, goal checks, episode runner and success-rate reports."""

from __future__ import annotations

from .fixtures import golden_backend, golden_script, lesioned_backend
from .metrics import MetricsReport, check_goal, format_table, similarity
from .runner import ABLATIONS, EpisodeConfig, EpisodeTrace, replay, run_episode, run_suite
from .tasks import (
    CATEGORIES,
    CATEGORY_LABELS,
    Assertion,
    GoalChecker,
    PackError,
    PixelSim,
    Predicate,
    RegionEq,
    TaskPack,
    TaskSpec,
    default_pack_path,
    load_pack,
)

__all__ = [
    "ABLATIONS", "CATEGORIES", "CATEGORY_LABELS", "Assertion", "EpisodeConfig", "EpisodeTrace",
    "GoalChecker", "MetricsReport", "PackError", "PixelSim", "Predicate", "RegionEq", "TaskPack",
    "TaskSpec", "check_goal", "default_pack_path", "format_table", "golden_backend", "golden_script",
    "lesioned_backend", "load_pack", "replay", "run_episode", "run_suite", "similarity",
]
