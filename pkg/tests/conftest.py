from __future__ import annotations

import threading
import time

import pytest
from hypothesis import HealthCheck, settings

from acegui import llm_backend
from acegui.eval_harness import load_pack

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


class _ReplyLedger:
    """Every deterministic backend must answer a repeated prompt the same way."""

    def __init__(self):
        self.lock = threading.Lock()
        self.seen: dict[tuple[int, str], str] = {}
        self.keep: dict[int, object] = {}  # pins backends so ids are not reused
        self.conflicts: list[str] = []

    def __call__(self, backend, rec: llm_backend.CallRecord) -> None:
        if not getattr(backend, "deterministic", False) or rec.reply is None:
            return
        key = (id(backend), llm_backend.prompt_hash(rec.prompt))
        with self.lock:
            self.keep[id(backend)] = backend
            old = self.seen.setdefault(key, rec.reply)
            if old != rec.reply:
                self.conflicts.append(f"{rec.backend}: call {rec.index} answered a repeated prompt differently")


@pytest.fixture(scope="session", autouse=True)
def reply_ledger():
    ledger = _ReplyLedger()
    llm_backend.add_observer(ledger)
    yield ledger
    llm_backend.remove_observer(ledger)
    assert not ledger.conflicts, ledger.conflicts


@pytest.fixture(scope="session")
def pack():
    return load_pack()


def pytest_configure(config):
    config._acegui_start = time.monotonic()


def pytest_collection_modifyitems(config, items):
    # acceptance last, so its runtime check sees the whole session
    items.sort(key=lambda item: item.module.__name__.endswith("test_acceptance"))
