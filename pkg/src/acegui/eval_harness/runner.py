"""Episode and suite runners, with replayable traces.

An episode builds a plan, then loops: observe, parse the screen, let the
critic judge the previous action, move the plan cursor, ask the actor for
the next action and execute it. The loop ends when the last subtask is
reported finished or a step cap is hit; the final state is then checked
against the task goal.

Traces are JSON lines. The only wall-clock value is the ``ts`` field of
the header record, so two runs can be compared after blanking it.
"""

from __future__ import annotations

import datetime as _dt
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Sequence

from .. import action_dsl as dsl
from .. import actor, critic, planner
from ..gui_parser import ParserConfig, parse_gui
from ..llm_backend import Backend
from ..sim_desktop import LocalEnv, load_task
from .metrics import MetricsReport, check_goal
from .tasks import TaskPack, TaskSpec

__all__ = [
    "ABLATIONS",
    "EpisodeConfig",
    "EpisodeTrace",
    "replay",
    "run_episode",
    "run_suite",
]

ABLATIONS = ("no_planner", "no_critic", "no_transcript")

# reason strings in the outcome record
REASON_GOAL = "goal"
REASON_GOAL_MISSED = "goal not met"
REASON_CAP = "cap"
REASON_ERROR = "error"


@dataclass
class EpisodeConfig:
    ablation: str | None = None
    subtask_cap: int = actor.SUBTASK_STEP_CAP
    episode_cap: int = actor.EPISODE_STEP_CAP
    fixed_steps: int = 1  # steps per subtask when the critic is bypassed
    history_window: int = actor.HISTORY_WINDOW
    parser: ParserConfig = field(default_factory=ParserConfig)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.ablation is not None and self.ablation not in ABLATIONS:
            raise ValueError(f"unknown ablation {self.ablation!r}; expected one of {', '.join(ABLATIONS)}")

    @property
    def label(self) -> str:
        return self.ablation or "full"


@dataclass
class EpisodeTrace:
    header: dict
    plan: dict | None = None
    steps: list[dict] = field(default_factory=list)
    outcome: dict = field(default_factory=dict)

    @property
    def success(self) -> bool:
        return bool(self.outcome.get("success"))

    @property
    def reason(self) -> str:
        return self.outcome.get("reason", "")

    def records(self) -> list[dict]:
        out = [dict(self.header, type="header")]
        if self.plan is not None:
            out.append(dict(self.plan, type="plan"))
        out += [dict(s, type="step") for s in self.steps]
        out.append(dict(self.outcome, type="outcome"))
        return out

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r, sort_keys=True, ensure_ascii=False) + "\n" for r in self.records())

    @classmethod
    def from_jsonl(cls, text: str) -> "EpisodeTrace":
        recs = [json.loads(line) for line in text.splitlines() if line.strip()]
        if not recs or recs[0].get("type") != "header":
            raise ValueError("trace does not start with a header record")

        def strip(r):
            return {k: v for k, v in r.items() if k != "type"}

        trace = cls(strip(recs[0]))
        for r in recs[1:]:
            kind = r.get("type")
            if kind == "plan":
                trace.plan = strip(r)
            elif kind == "step":
                trace.steps.append(strip(r))
            elif kind == "outcome":
                trace.outcome = strip(r)
            else:
                raise ValueError(f"unknown trace record type {kind!r}")
        return trace

    def scrubbed(self) -> "EpisodeTrace":
        return EpisodeTrace(dict(self.header, ts=""), self.plan, self.steps, self.outcome)


def _calls(log: Sequence[tuple[str, str, str]]) -> list[dict]:
    return [{"template": t, "prompt": p, "reply": r} for t, p, r in log]


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _build_plan(spec: TaskSpec, backend: Backend, config: EpisodeConfig, log: list) -> tuple[planner.PlanTree, dict]:
    if config.ablation == "no_planner":
        # no task tree: the whole transcript is one subtask
        tree = planner.PlanTree((planner.Milestone(spec.query, (spec.transcript,)),))
        return tree, {"raw": None, "plan": tree.to_dict()}
    if config.ablation == "no_transcript":
        tree = planner.plan_from_query(spec.query, backend, log)
        return tree, {"raw": None, "plan": tree.to_dict()}
    raw = planner.extract_raw_plan(spec.transcript, backend, log)
    tree = planner.refine_plan(raw, spec.query, backend, log)
    return tree, {"raw": raw.to_dict(), "plan": tree.to_dict()}


def run_episode(spec: TaskSpec, backend: Backend, env=None, config: EpisodeConfig | None = None) -> EpisodeTrace:
    """Run one task. Module errors end the episode as a failure; they never propagate."""
    config = config or EpisodeConfig()
    env = env if env is not None else LocalEnv(load_task(spec))
    trace = EpisodeTrace({
        "task": spec.id,
        "category": spec.category,
        "backend": getattr(backend, "name", type(backend).__name__),
        "config": config.label,
        "seed": config.seed,
        "initial_state_hash": env.state_hash(),
        "ts": _now(),
    })
    try:
        log: list = []
        tree, plan_rec = _build_plan(spec, backend, config, log)
        trace.plan = dict(plan_rec, calls=_calls(log))
        trace.outcome = _loop(spec, backend, env, config, tree, trace)
    except Exception as exc:  # the runner records every failure instead of raising
        trace.outcome = {"success": False, "reason": REASON_ERROR, "detail": f"{type(exc).__name__}: {exc}"}
    trace.outcome["steps"] = len(trace.steps)
    return trace


def _loop(spec, backend, env, config: EpisodeConfig, tree, trace: EpisodeTrace) -> dict:
    templates = spec.templates
    episode_cap = min(config.episode_cap, spec.step_cap)
    screen = tuple(env.screen)
    cursor = planner.start(tree)
    doc = parse_gui(env.observe(), templates, config.parser)
    prev_doc = None
    prev_action: list = []
    critique = critic.first_critique()
    history: list[actor.HistoryItem] = []
    on_subtask = 0
    source = "initial"
    while True:
        calls: list = []
        if prev_doc is not None:
            if config.ablation == "no_critic":
                finished = on_subtask >= config.fixed_steps
                critique = critic.Critique(True, "", finished, "" if finished else "critic disabled")
                source = "fixed"
            else:
                sub = planner.subtask(tree, cursor)
                critique = critic.assess(prev_doc, doc, prev_action, sub, backend, calls)
                source = "critic"
            history.append(actor.HistoryItem(planner.subtask(tree, cursor), tuple(prev_action), critique))
            del history[:-config.history_window]
        last = {"critique": critique.to_dict(), "critique_source": source, "calls": _calls(calls)}
        moved = actor.advance_subtask(cursor, critique, tree)
        if moved.done:
            break
        if moved != cursor:
            on_subtask = 0
        cursor = moved
        if len(trace.steps) >= episode_cap or on_subtask >= config.subtask_cap:
            return {"success": False, "reason": REASON_CAP, "last": last,
                    "detail": f"step cap reached on subtask {cursor.milestone_idx}.{cursor.subtask_idx}"}
        step = actor.AgentStep(prev_action, doc, planner.subtask(tree, cursor), planner.parent(tree, cursor),
                               critique, list(history), config.history_window)
        action = actor.next_action(step, backend, screen, calls)
        report = env.execute(action)
        obs = env.observe()
        new_doc = parse_gui(obs, templates, config.parser)
        trace.steps.append({
            "index": len(trace.steps),
            "cursor": cursor.to_dict(),
            "milestone": step.milestone,
            "subtask": step.subtask,
            "critique": critique.to_dict(),
            "critique_source": source,
            "calls": _calls(calls),
            "action": dsl.render(action),
            "results": list(report.results),
            "state_hash": report.state_hash,
            "raster_hash": obs.raster.digest(),
        })
        prev_doc, doc, prev_action = doc, new_doc, action
        on_subtask += 1
    ok, detail = check_goal(env.final_state(), spec)
    return {"success": ok, "reason": REASON_GOAL if ok else REASON_GOAL_MISSED, "detail": detail, "last": last}


def replay(trace: EpisodeTrace, spec: TaskSpec) -> list[str]:
    """Re-execute a trace's actions; return mismatch descriptions (empty when faithful)."""
    env = LocalEnv(load_task(spec))
    problems = []
    if env.state_hash() != trace.header.get("initial_state_hash"):
        problems.append("initial state hash differs")
    for s in trace.steps:
        report = env.execute(dsl.parse(s["action"]))
        if report.state_hash != s["state_hash"]:
            problems.append(f"step {s['index']}: state hash differs")
        if env.observe().raster.digest() != s["raster_hash"]:
            problems.append(f"step {s['index']}: raster hash differs")
    return problems


# ---- suites ----


def run_suite(pack: TaskPack, backend_factory: Callable[[TaskSpec], Backend], ablation: str | None = None,
              jobs: int = 1, seed: int = 0, env_factory: Callable[[TaskSpec], Any] | None = None,
              on_trace: Callable[[EpisodeTrace], None] | None = None) -> MetricsReport:
    """Run every task of the pack under one configuration.

    Each task gets its own backend and environment, so tasks may run in
    parallel (``jobs`` workers) without sharing state.
    """
    config = EpisodeConfig(ablation=ablation, seed=seed)

    def one(spec: TaskSpec) -> EpisodeTrace:
        try:
            backend = backend_factory(spec)
            env = env_factory(spec) if env_factory else None
        except Exception as exc:
            return EpisodeTrace({"task": spec.id, "category": spec.category, "config": config.label, "ts": _now()},
                                outcome={"success": False, "reason": REASON_ERROR,
                                         "detail": f"{type(exc).__name__}: {exc}", "steps": 0})
        try:
            return run_episode(spec, backend, env, config)
        finally:
            if env is not None and hasattr(env, "close"):
                env.close()

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            traces = list(pool.map(one, pack.tasks))
    else:
        traces = [one(t) for t in pack.tasks]
    if on_trace is not None:
        for t in traces:
            on_trace(t)
    return MetricsReport.from_outcomes(config.label, ((s.id, s.category, t.success) for s, t in zip(pack.tasks, traces)))


def traces_to_jsonl(traces: Iterable[EpisodeTrace]) -> str:
    return "".join(t.to_jsonl() for t in traces)
