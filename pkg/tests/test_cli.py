from __future__ import annotations

import json

import pytest

from acegui import bridge
from acegui.cli import main
from acegui.eval_harness import EpisodeTrace
from acegui.llm_backend import ScriptRule
from acegui.sim_desktop import load_task


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_run_golden(capsys):
    code, out, err = run(capsys, "run", "--task", "widget/volume_set", "--backend", "scripted:golden")
    assert code == 0
    trace = EpisodeTrace.from_jsonl(out)
    assert trace.success and "success" in err


def test_run_failure_exit_code(capsys):
    code, _, err = run(capsys, "run", "--task", "sysset/dark_mode", "--backend", "scripted:lesioned",
                       "--ablate=no_critic")
    assert code == 1 and "failure" in err


def test_parse_actions_echo(capsys):
    assert run(capsys, "parse-actions", "click(200, 220)") == (0, "click(200, 220)\n", "")


def test_parse_actions_stdin(capsys, monkeypatch):
    import io
    monkeypatch.setattr("sys.stdin", io.StringIO("```\nmoveTo(1,2);press('enter')\n```"))
    code, out, _ = run(capsys, "parse-actions")
    assert code == 0 and out == "moveTo(1, 2)\npress('enter')\n"


def test_parse_actions_errors(capsys):
    code, _, err = run(capsys, "parse-actions", "fly(1)")
    assert code == 1 and "parse error" in err
    code, _, err = run(capsys, "parse-actions", "--screen", "100x100", "click(500, 1)")
    assert code == 1 and "OutOfBounds" in err


@pytest.mark.parametrize("argv", [
    ["--bogus"],
    [],
    ["run", "--task", "widget/volume_set", "--frobnicate"],
    ["run", "--task", "no/such", "--backend", "scripted:golden"],
    ["run", "--task", "widget/volume_set", "--backend", "magic"],
    ["run", "--task", "widget/volume_set", "--backend", "scripted:/no/such/rules.json"],
    ["run", "--task", "widget/volume_set", "--ablate", "no_actor"],
    ["suite", "--jobs", "0"],
    ["list-tasks", "--pack", "/no/such/pack"],
    ["report", "/no/such/report.json"],
])
def test_usage_errors(capsys, argv):
    code, out, err = run(capsys, *argv)
    assert code == 2 and err and not out


def test_list_tasks(capsys):
    code, out, _ = run(capsys, "list-tasks")
    ids = [line.split("\t")[0] for line in out.splitlines()]
    assert code == 0 and "widget/volume_set" in ids and len(ids) >= 10


def test_suite_report_and_replay(capsys, tmp_path):
    out_dir = tmp_path / "res"
    code, table, _ = run(capsys, "suite", "--backend", "scripted:golden", "--ablate", "no_transcript",
                         "--jobs", "2", "--out", str(out_dir))
    assert code == 0
    assert table.splitlines()[0].split("|")[0].strip() == "Method"
    assert [r["label"] for r in json.loads((out_dir / "report.json").read_text())] == ["full", "no_transcript"]
    code, again, _ = run(capsys, "report", str(out_dir / "report.json"))
    assert code == 0 and again == table
    trace = out_dir / "traces" / "full" / "widget__volume_set.jsonl"
    code, out, _ = run(capsys, "replay", str(trace))
    assert code == 0 and json.loads(out)["faithful"] is True
    tampered = trace.read_text().replace('"state_hash": "', '"state_hash": "00', 1)
    bad = tmp_path / "bad.jsonl"
    bad.write_text(tampered)
    code, out, err = run(capsys, "replay", str(bad))
    assert code == 1 and "differs" in err


def test_suite_exit_one_on_any_failure(capsys):
    code, table, err = run(capsys, "suite", "--backend", "scripted:lesioned", "--ablate", "no_critic",
                           "--only-ablations")
    assert code == 1 and "no_critic" in table and "failed" in err


def test_identical_argv_identical_trace(capsys, tmp_path):
    traces = []
    for i in range(2):
        out = tmp_path / str(i)
        assert run(capsys, "run", "--task", "design/keyframe", "--backend", "scripted:lesioned",
                   "--seed", "3", "--out", str(out))[0] == 0
        traces.append(EpisodeTrace.from_jsonl((out / "design__keyframe.jsonl").read_text()).scrubbed().to_jsonl())
    assert traces[0] == traces[1]


def test_rules_file_backend(capsys, tmp_path):
    rules = tmp_path / "rules.json"
    rules.write_text(json.dumps({"rules": [ScriptRule("substring", "plan.extract/v1", "no outline").to_dict()]}))
    code, out, err = run(capsys, "run", "--task", "widget/volume_set", "--backend", f"scripted:{rules}")
    assert code == 1 and EpisodeTrace.from_jsonl(out).reason == "error"


def test_run_connect(capsys, pack):
    srv = bridge.serve(lambda tid: load_task(pack.get(tid)), ("127.0.0.1", 0), background=True)
    try:
        host, port = srv.address
        code, out, _ = run(capsys, "run", "--task", "widget/alarm_set", "--backend", "scripted:golden",
                           "--connect", f"{host}:{port}")
        assert code == 0 and EpisodeTrace.from_jsonl(out).success
    finally:
        srv.stop()


def test_serve_bad_listen(capsys):
    code, _, err = run(capsys, "serve", "--listen", "nonsense")
    assert code == 2 and "HOST:PORT" in err
