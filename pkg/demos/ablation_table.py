"""Success rates per category for the full agent and each ablation.

The lesioned backend repeats one mistake per task. The critic is what
notices it and the planner is what isolates it in a small subtask, so
dropping either module loses those tasks; dropping the transcript does
not, because the scripted backend plans just as well from the query.

    python demos/ablation_table.py
"""

from __future__ import annotations

from acegui.eval_harness import ABLATIONS, format_table, lesioned_backend, load_pack, run_suite


def main() -> None:
    pack = load_pack()
    reports = [run_suite(pack, lesioned_backend, a, jobs=4) for a in (None, *ABLATIONS)]
    print(format_table(reports))
    for rep in reports[1:]:
        print(f"{rep.label:>14}: lost {', '.join(rep.failed) or 'nothing'}")


if __name__ == "__main__":
    main()
