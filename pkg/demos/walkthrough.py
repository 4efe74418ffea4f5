"""Follow one episode step by step.

Runs ``sysset/dark_mode`` with the lesioned scripted backend, which makes
one mistake on purpose, and prints what each module did: the plan, the
screen as the parser sees it, each critique, each action.

    python demos/walkthrough.py [task_id]
"""

from __future__ import annotations

import sys

from acegui.eval_harness import lesioned_backend, load_pack, run_episode
from acegui.gui_parser import parse_gui, serialize
from acegui.planner import PlanTree, render_outline
from acegui.sim_desktop import load_task, observe


def main(task_id: str = "sysset/dark_mode") -> None:
    spec = load_pack().get(task_id)
    print(f"task   {spec.id} ({spec.category})")
    print(f"query  {spec.query}")
    print(f"video  {spec.transcript}\n")

    doc = parse_gui(observe(load_task(spec)), spec.templates)
    print("first screen, as text:")
    print("\n".join(serialize(doc).splitlines()[:12]) + "\n  ...\n")

    trace = run_episode(spec, lesioned_backend(spec))
    print("raw plan (from the transcript):")
    print(render_outline(PlanTree.from_dict(trace.plan["raw"])))
    print("\nrefined plan (after the query):")
    print(render_outline(PlanTree.from_dict(trace.plan["plan"])) + "\n")

    for step in trace.steps:
        c = step["critique"]
        verdict = "ok" if c["success"] else f"FAILED ({c['success_note']})"
        print(f"step {step['index']}  subtask: {step['subtask']}")
        print(f"        critique of previous action [{step['critique_source']}]: {verdict}")
        for line in step["action"].splitlines():
            print(f"        > {line}")
    print(f"\noutcome: {'success' if trace.success else 'failure'} ({trace.outcome['detail']})")


if __name__ == "__main__":
    main(*sys.argv[1:])
