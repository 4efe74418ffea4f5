"""Run an episode against an environment hosted over TCP.

Starts a bridge server on a free loopback port, runs the same task in
process and through the bridge, and checks that the two traces match
once the timestamp is blanked.

    python demos/bridge_loopback.py [task_id]
"""

from __future__ import annotations

import sys

from acegui import bridge
from acegui.eval_harness import golden_backend, load_pack, run_episode
from acegui.sim_desktop import load_task


def main(task_id: str = "filemani/move_report") -> None:
    pack = load_pack()
    spec = pack.get(task_id)
    server = bridge.serve(lambda tid: load_task(pack.get(tid)), ("127.0.0.1", 0), background=True)
    print("server on %s:%d" % server.address)
    try:
        with bridge.connect(server.address) as env:
            env.reset(spec.id, load_task(spec))
            remote = run_episode(spec, golden_backend(spec), env)
    finally:
        server.stop()
    local = run_episode(spec, golden_backend(spec))
    same = remote.scrubbed().to_jsonl() == local.scrubbed().to_jsonl()
    print(f"{spec.id}: remote {'success' if remote.success else 'failure'}, "
          f"{len(remote.steps)} steps, trace identical to in-process: {same}")


if __name__ == "__main__":
    main(*sys.argv[1:])
