"""Command-line entry points.

    acegui list-tasks
    acegui run --task widget/volume_set --backend scripted:golden
    acegui suite --backend scripted:lesioned --ablate no_critic --out results/
    acegui serve --listen 127.0.0.1:48333
    acegui run --task widget/volume_set --backend scripted:golden --connect 127.0.0.1:48333
    acegui replay results/traces/full/widget__volume_set.jsonl
    acegui report results/report.json
    acegui parse-actions "click(200, 220)"

Exit status: 0 on success, 1 when a task (or any task of a suite) fails,
2 on usage or configuration errors. Diagnostics go to standard error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Callable, Sequence

from . import action_dsl as dsl
from . import bridge
from .eval_harness import (
    ABLATIONS,
    EpisodeConfig,
    EpisodeTrace,
    MetricsReport,
    TaskPack,
    TaskSpec,
    format_table,
    golden_backend,
    lesioned_backend,
    load_pack,
    replay,
    run_episode,
    run_suite,
)
from .eval_harness.tasks import PackError
from .llm_backend import Backend, HttpBackend, HttpConfig, ScriptedBackend
from .sim_desktop import load_task

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _err(msg: str) -> None:
    print(msg, file=sys.stderr)


def _addr(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not port.isdigit():
        raise UsageError(f"expected HOST:PORT, got {text!r}")
    return host or "127.0.0.1", int(port)


def backend_factory(spec: str, seed: int = 0) -> Callable[[TaskSpec], Backend]:
    """Map a ``--backend`` value to a per-task backend constructor."""
    if spec == "scripted:golden":
        return golden_backend
    if spec == "scripted:lesioned":
        return lesioned_backend
    if spec.startswith("scripted:"):
        path = Path(spec[len("scripted:"):])
        if not path.is_file():
            raise UsageError(f"rules file not found: {path}")
        try:
            ScriptedBackend.from_rules_file(path)
        except (ValueError, KeyError, TypeError) as exc:
            raise UsageError(f"bad rules file {path}: {exc}") from None
        return lambda _spec: ScriptedBackend.from_rules_file(path)
    if spec == "http":
        config = HttpConfig.from_env()
        return lambda _spec: HttpBackend(config)
    raise UsageError(f"unknown backend {spec!r}; use scripted:golden, scripted:lesioned, scripted:<file> or http")


def _pack(args) -> TaskPack:
    try:
        return load_pack(args.pack)
    except PackError as exc:
        raise UsageError(f"cannot load task pack: {exc}") from None


def _trace_name(task_id: str) -> str:
    return task_id.replace("/", "__") + ".jsonl"


def cmd_list_tasks(args) -> int:
    for spec in _pack(args).tasks:
        print(f"{spec.id}\t{spec.category}\t{spec.query}")
    return EXIT_OK


def cmd_run(args) -> int:
    pack = _pack(args)
    try:
        spec = pack.get(args.task)
    except KeyError as exc:
        raise UsageError(str(exc)) from None
    backend = backend_factory(args.backend, args.seed)(spec)
    config = EpisodeConfig(ablation=args.ablate[0] if args.ablate else None, seed=args.seed)
    env = None
    if args.connect:
        try:
            env = bridge.connect(_addr(args.connect))
            env.reset(spec.id, load_task(spec))
        except bridge.BridgeError as exc:
            _err(f"error: cannot use bridge at {args.connect}: {exc}")
            return EXIT_USAGE
    try:
        trace = run_episode(spec, backend, env, config)
    finally:
        if env is not None:
            env.close()
    text = trace.to_jsonl()
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / _trace_name(spec.id)).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    status = "success" if trace.success else f"failure ({trace.reason}: {trace.outcome.get('detail', '')})"
    _err(f"{spec.id} [{config.label}]: {status} after {trace.outcome.get('steps', 0)} step(s)")
    return EXIT_OK if trace.success else EXIT_FAIL


def cmd_suite(args) -> int:
    pack = _pack(args)
    factory = backend_factory(args.backend, args.seed)
    labels = [None] + [a for a in args.ablate if a is not None]
    if args.only_ablations and args.ablate:
        labels = list(args.ablate)
    out = Path(args.out) if args.out else None
    reports = []
    for ablation in labels:
        traces: list[EpisodeTrace] = []
        rep = run_suite(pack, factory, ablation, jobs=args.jobs, seed=args.seed, on_trace=traces.append)
        reports.append(rep)
        if out is not None:
            tdir = out / "traces" / rep.label
            tdir.mkdir(parents=True, exist_ok=True)
            for t in traces:
                (tdir / _trace_name(t.header["task"])).write_text(t.to_jsonl(), encoding="utf-8")
        for task_id in rep.failed:
            _err(f"{rep.label}: {task_id} failed")
    table = format_table(reports)
    print(table)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True) + "\n",
                                         encoding="utf-8")
        (out / "report.txt").write_text(table + "\n", encoding="utf-8")
    return EXIT_OK if all(not r.failed for r in reports) else EXIT_FAIL


def cmd_serve(args) -> int:
    pack = _pack(args)

    def factory(task_id: str):
        return load_task(pack.get(task_id))

    addr = _addr(args.listen)
    _err(f"serving {len(pack.tasks)} task(s) on {addr[0]}:{addr[1]}")
    try:
        bridge.serve(factory, addr)
    except OSError as exc:
        raise UsageError(f"cannot listen on {args.listen}: {exc}") from None
    except KeyboardInterrupt:
        pass
    return EXIT_OK


def cmd_replay(args) -> int:
    pack = _pack(args)
    try:
        trace = EpisodeTrace.from_jsonl(Path(args.trace).read_text(encoding="utf-8"))
        spec = pack.get(trace.header["task"])
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot read trace: {exc}") from None
    problems = replay(trace, spec)
    for p in problems:
        _err(p)
    print(json.dumps({"task": spec.id, "steps": len(trace.steps), "faithful": not problems}))
    return EXIT_OK if not problems else EXIT_FAIL


def cmd_report(args) -> int:
    reports = []
    for path in args.reports:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read report {path}: {exc}") from None
        for d in data if isinstance(data, list) else [data]:
            reports.append(MetricsReport.from_dict(d))
    print(format_table(reports))
    return EXIT_OK


def cmd_parse_actions(args) -> int:
    text = args.text if args.text is not None else sys.stdin.read()
    try:
        script = dsl.parse(text)
    except dsl.ActionSyntaxError as exc:
        _err(f"parse error: {exc}")
        return EXIT_FAIL
    if args.screen:
        w, _, h = args.screen.partition("x")
        if not (w.isdigit() and h.isdigit()):
            raise UsageError(f"expected WIDTHxHEIGHT, got {args.screen!r}")
        problems = dsl.validate(script, int(w), int(h))
        for p in problems:
            _err(f"invalid: {p}")
        if problems:
            print(dsl.render(script))
            return EXIT_FAIL
    print(dsl.render(script))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="acegui", description="GUI agent on a simulated desktop.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def common(p, backend=False):
        p.add_argument("--pack", help="task pack directory (default: bundled pack)")
        p.add_argument("--seed", type=int, default=0)
        if backend:
            p.add_argument("--backend", default="scripted:golden",
                           help="scripted:golden | scripted:lesioned | scripted:<rules.json> | http")
            p.add_argument("--ablate", action="append", choices=ABLATIONS, default=[],
                           help="disable a module (repeatable for suite)")
            p.add_argument("--out", help="output directory")

    p = sub.add_parser("run", help="run one task")
    common(p, backend=True)
    p.add_argument("--task", required=True)
    p.add_argument("--connect", help="HOST:PORT of a bridge server")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("suite", help="run every task of a pack")
    common(p, backend=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--only-ablations", action="store_true", help="skip the full configuration row")
    p.set_defaults(func=cmd_suite)

    p = sub.add_parser("serve", help="host environments over TCP")
    common(p)
    p.add_argument("--listen", default=f"127.0.0.1:{bridge.DEFAULT_PORT}")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("replay", help="re-execute a trace and check its state hashes")
    common(p)
    p.add_argument("trace")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("report", help="print the table for saved report.json files")
    p.add_argument("reports", nargs="+")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("parse-actions", help="parse an action script and print its canonical form")
    p.add_argument("text", nargs="?", help="script text (default: standard input)")
    p.add_argument("--screen", help="also validate against WIDTHxHEIGHT")
    p.set_defaults(func=cmd_parse_actions)

    p = sub.add_parser("list-tasks", help="list the tasks of a pack")
    common(p)
    p.set_defaults(func=cmd_list_tasks)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors this way
        return EXIT_USAGE if exc.code else EXIT_OK
    if getattr(args, "jobs", 1) < 1:
        _err("--jobs must be at least 1")
        return EXIT_USAGE
    if args.command == "run" and len(args.ablate) > 1:
        _err("run takes at most one --ablate")
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        _err(f"error: {exc}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
