from __future__ import annotations

import threading

import pytest

from campus_sms.client import (
    HttpTransport,
    LocalTransport,
    PollResult,
    Worker,
    WorkerConfig,
)
from campus_sms.errors import TransportError
from campus_sms.models import StatusFlag
from campus_sms.system import System, SystemConfig

ASHA = "+911234500001"


def make_system(**overrides) -> System:
    config = SystemConfig(**{"store_path": "memory", **overrides})
    sys = System(config)
    sys.service.create_recipient(ASHA, "Asha")
    return sys


def make_worker(system, worker_id="w1", **cfg) -> Worker:
    config = WorkerConfig(worker_id=worker_id, **cfg)
    return Worker(config, LocalTransport(system.service), system.sim, clock=system.clock)


def test_poll_once_lossless_batch():
    system = make_system()
    for i in range(3):
        system.service.submit_message(ASHA, f"m{i}", 0, "admin")
    worker = make_worker(system)
    result = worker.poll_once(now=0)
    assert result == PollResult(fetched=3, delivered=3, failed=0)
    inbox = system.sim.handset_inbox(ASHA)
    assert len(inbox.messages) == 3
    assert all(m.status == StatusFlag.SENT for m in system.store.list_messages())


def test_poll_once_empty_queue():
    system = make_system()
    worker = make_worker(system)
    assert worker.poll_once(now=0) == PollResult(0, 0, 0)


def test_poll_once_forced_loss_reports_failure():
    system = make_system(loss_prob=1.0)
    system.service.submit_message(ASHA, "x", 0, "admin")
    worker = make_worker(system)
    result = worker.poll_once(now=0)
    assert result == PollResult(fetched=1, delivered=0, failed=1)
    # server requeued it (status 2 report, retries remaining)
    msg = system.store.get_message(1)
    assert msg.status == StatusFlag.NEW
    assert msg.attempts == 1


def test_counters_always_balance():
    system = make_system(loss_prob=0.5, seed=123)
    for i in range(20):
        system.service.submit_message(ASHA, f"m{i}", 0, "admin")
    worker = make_worker(system, max_batch=20)
    result = worker.poll_once(now=0)
    assert result.fetched == 20
    assert result.delivered + result.failed == result.fetched


def test_worker_never_reports_unfetched_ids():
    """Reports only carry ids from the fetched envelope (checked via the
    server-side audit: every report lands on a row this worker claimed)."""
    system = make_system()
    for i in range(5):
        system.service.submit_message(ASHA, f"m{i}", 0, "admin")
    make_worker(system, worker_id="w1", max_batch=2).poll_once(now=0)
    for record in system.store.transition_log():
        if record.to_status == StatusFlag.SENT:
            assert record.worker == "w1"


def test_oversized_body_reported_lost_not_crash():
    system = make_system()
    # bypass the radio limit via direct store insert of a 2000-char body
    system.store.insert_message(ASHA, "y" * 2000, 0, "admin")
    worker = make_worker(system)
    result = worker.poll_once(now=0)
    assert result == PollResult(fetched=1, delivered=0, failed=1)


def test_run_loop_drains_queue_and_exits():
    system = make_system()
    for i in range(10):
        system.service.submit_message(ASHA, f"m{i}", 0, "admin")
    worker = make_worker(system, max_batch=4)

    def stop_after_idle(_):
        if not system.store.due_new(system.clock.now, 1):
            worker.request_exit()

    summary = worker.run_loop(sleep_fn=stop_after_idle)
    assert summary.delivered == 10
    assert summary.fetched == 10


def test_run_loop_exit_requested_from_another_thread():
    system = make_system()
    worker = make_worker(system)
    finished = []

    def run():
        finished.append(worker.run_loop(sleep_fn=lambda _: None))

    thread = threading.Thread(target=run)
    thread.start()
    worker.request_exit()
    thread.join(timeout=5)
    assert not thread.is_alive()
    assert finished


class FlakyTransport:
    def __init__(self, failures: int):
        self.remaining = failures

    def fetch(self, worker_id, max_items):
        self.remaining -= 1
        raise TransportError("unreachable")

    def report(self, report):
        raise AssertionError("never reached")


def test_run_loop_aborts_after_consecutive_transport_failures():
    system = make_system()
    config = WorkerConfig(worker_id="w1", max_consecutive_failures=3)
    worker = Worker(config, FlakyTransport(99), system.sim, clock=system.clock)
    with pytest.raises(TransportError):
        worker.run_loop(sleep_fn=lambda _: None)


def test_http_transport_against_bad_endpoint():
    transport = HttpTransport("http://127.0.0.1:9")  # discard port, refused
    with pytest.raises(TransportError):
        transport.fetch("w1", 1)


def test_parallel_workers_share_the_load():
    system = make_system()
    for i in range(100):
        system.service.submit_message(ASHA, f"m{i}", 0, "admin")
    workers = [make_worker(system, worker_id=f"w{i}", max_batch=7) for i in range(4)]
    totals = []

    def drain(worker):
        delivered = 0
        while True:
            result = worker.poll_once(now=0)
            if result.fetched == 0:
                break
            delivered += result.delivered
        totals.append(delivered)

    threads = [threading.Thread(target=drain, args=(w,)) for w in workers]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert sum(totals) == 100
    inbox = system.sim.handset_inbox(ASHA)
    assert len(inbox.messages) == 100  # no duplicates
    assert all(m.status == StatusFlag.SENT for m in system.store.list_messages())
