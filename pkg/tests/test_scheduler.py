from __future__ import annotations

import threading

import pytest

from campus_sms.errors import (
    EmptyGroup,
    NotClaimedByWorker,
    UnknownGroup,
    UnknownPlaceholder,
)
from campus_sms.models import (
    AttemptOutcome,
    GroupProfile,
    RecipientProfile,
    StatusFlag,
)
from campus_sms.scheduler import Scheduler, SchedulerConfig

N = StatusFlag.NEW
P = StatusFlag.PROCESSING
F = StatusFlag.FAILED
S = StatusFlag.SENT


def walk_retry_policy(outcomes, max_retries=3, backoff=60, schedule=0, report_times=None):
    """Independent oracle: replay the documented retry rules by hand.

    State machine, not the production code path: each report increments
    the attempt counter; Delivered is terminal; Lost keeps the message
    retryable while attempts <= max_retries, moving its schedule to the
    report time plus the backoff.
    """
    status, attempts = 0, 0
    times = report_times or list(range(1, len(outcomes) + 1))
    for outcome, t in zip(outcomes, times):
        attempts += 1
        if outcome == "delivered":
            status = 3
            break
        if attempts <= max_retries:
            status = 0
            schedule = t + backoff
        else:
            status = 2
    return status, schedule, attempts


# frozen expectations computed from the oracle above, reports 100 ticks
# apart so a requeued message is due again before the next report
ORACLE_CASES = [
    (["lost"], (0, 160, 1)),
    (["delivered"], (3, 0, 1)),
    (["lost", "delivered"], (3, 160, 2)),
    (["lost", "lost", "lost"], (0, 360, 3)),
    (["lost", "lost", "lost", "lost"], (2, 360, 4)),
]


@pytest.mark.parametrize("outcomes,expected", ORACLE_CASES)
def test_oracle_is_frozen(outcomes, expected):
    times = [100 * (i + 1) for i in range(len(outcomes))]
    assert walk_retry_policy(outcomes, report_times=times) == expected


def drive_outcomes(store, scheduler, outcomes):
    mid = store.insert_message("+911234500001", "x", 0, "admin")
    for i, outcome in enumerate(outcomes):
        t = 100 * (i + 1)
        claimed = scheduler.claim_batch(t, "w1", 1)
        assert [m.id for m in claimed] == [mid]
        scheduler.report_outcome(
            "w1",
            mid,
            AttemptOutcome.DELIVERED if outcome == "delivered" else AttemptOutcome.LOST,
            now=t,
        )
    return store.get_message(mid)


@pytest.mark.parametrize("outcomes,expected", ORACLE_CASES)
def test_retry_policy_matches_oracle(store, outcomes, expected):
    scheduler = Scheduler(store, SchedulerConfig(max_retries=3, backoff_ticks=60))
    final = drive_outcomes(store, scheduler, outcomes)
    status, schedule, attempts = expected
    assert final.status == StatusFlag(status)
    assert final.attempts == attempts
    if final.status == N:
        assert final.schedule_time == schedule


def test_lost_with_retries_remaining_requeues(store):
    """First failure: requeued at now + backoff."""
    scheduler = Scheduler(store, SchedulerConfig(max_retries=3, backoff_ticks=60))
    mid = store.insert_message("+911234500001", "x", 0, "admin")
    scheduler.claim_batch(5, "w1", 1)
    result = scheduler.report_outcome("w1", mid, AttemptOutcome.LOST, now=5)
    assert result == N
    msg = store.get_message(mid)
    assert msg.status == N
    assert msg.schedule_time == 65
    assert msg.attempts == 1


def test_exhausted_retries_go_dead(store):
    scheduler = Scheduler(store, SchedulerConfig(max_retries=3, backoff_ticks=60))
    mid = store.insert_message("+911234500001", "x", 0, "admin")
    t = 0
    for _ in range(4):
        t += 100
        scheduler.claim_batch(t, "w1", 1)
        result = scheduler.report_outcome("w1", mid, AttemptOutcome.LOST, now=t)
    assert result == F
    msg = store.get_message(mid)
    assert msg.status == F
    assert msg.attempts == 4
    # dead messages are never claimable again
    assert scheduler.claim_batch(t + 1000, "w1", 10) == []


def test_delivered_is_terminal(store):
    scheduler = Scheduler(store)
    mid = store.insert_message("+911234500001", "x", 0, "admin")
    scheduler.claim_batch(1, "w1", 1)
    assert scheduler.report_outcome("w1", mid, AttemptOutcome.DELIVERED, now=2) == S
    assert store.get_message(mid).status == S
    assert scheduler.claim_batch(100, "w2", 10) == []


def test_stale_report_is_rejected_without_state_change(store):
    scheduler = Scheduler(store, SchedulerConfig(lease_ticks=10))
    mid = store.insert_message("+911234500001", "x", 0, "admin")
    scheduler.claim_batch(0, "w1", 1)
    assert scheduler.sweep(10) == 1  # w1's lease expires
    scheduler.claim_batch(11, "w2", 1)
    with pytest.raises(NotClaimedByWorker):
        scheduler.report_outcome("w1", mid, AttemptOutcome.DELIVERED, now=12)
    msg = store.get_message(mid)
    assert msg.status == P
    assert msg.claimed_by == "w2"


def test_report_on_unclaimed_message(store):
    scheduler = Scheduler(store)
    mid = store.insert_message("+911234500001", "x", 0, "admin")
    with pytest.raises(NotClaimedByWorker):
        scheduler.report_outcome("w1", mid, AttemptOutcome.DELIVERED, now=1)


# -- claim_batch -------------------------------------------------------


def test_claim_batch_ordering(store):
    scheduler = Scheduler(store)
    for i, t in enumerate([30, 10, 20, 10, 40, 5, 25, 15, 35, 12]):
        store.insert_message("+911234500001", f"m{i}", t, "admin")
    claimed = scheduler.claim_batch(100, "w1", 4)
    assert [(m.schedule_time, m.id) for m in claimed] == [(5, 6), (10, 2), (10, 4), (12, 10)]
    assert all(m.status == P and m.claimed_by == "w1" for m in claimed)


def test_claim_batch_empty(store):
    scheduler = Scheduler(store)
    assert scheduler.claim_batch(0, "w1", 5) == []


def test_concurrent_claim_single_message(store):
    scheduler = Scheduler(store)
    store.insert_message("+911234500001", "x", 0, "admin")
    results = {}
    barrier = threading.Barrier(2)

    def claim(worker):
        barrier.wait()
        results[worker] = scheduler.claim_batch(0, worker, 1)

    threads = [threading.Thread(target=claim, args=(w,)) for w in ("w1", "w2")]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    sizes = sorted(len(v) for v in results.values())
    assert sizes == [0, 1]


def test_concurrent_claims_partition_batch(store):
    scheduler = Scheduler(store)
    ids = [store.insert_message("+911234500001", f"m{i}", 0, "admin") for i in range(40)]
    results = {}
    barrier = threading.Barrier(4)

    def claim(worker):
        barrier.wait()
        got = []
        while True:
            batch = scheduler.claim_batch(0, worker, 5)
            if not batch:
                break
            got.extend(m.id for m in batch)
        results[worker] = got

    threads = [threading.Thread(target=claim, args=(f"w{i}",)) for i in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    all_claimed = [mid for got in results.values() for mid in got]
    assert sorted(all_claimed) == ids  # complete, no duplicates


# -- sweep --------------------------------------------------------------


def test_sweep_reclaims_and_message_delivers_once(store):
    scheduler = Scheduler(store, SchedulerConfig(lease_ticks=50))
    mid = store.insert_message("+911234500001", "x", 0, "admin")
    scheduler.claim_batch(0, "w1", 1)
    assert scheduler.sweep(49) == 0
    assert scheduler.sweep(50) == 1
    claimed = scheduler.claim_batch(51, "w2", 1)
    assert [m.id for m in claimed] == [mid]
    assert scheduler.report_outcome("w2", mid, AttemptOutcome.DELIVERED, now=52) == S
    delivered = [
        a for a in store.attempts_for(mid) if a.outcome == AttemptOutcome.DELIVERED
    ]
    assert len(delivered) == 1


# -- multicast ----------------------------------------------------------


def seed_group(store):
    store.upsert_recipient(
        RecipientProfile("+911234500001", "Asha", "EN001", {"course": "CS101"})
    )
    store.upsert_recipient(
        RecipientProfile("+911234500002", "Ravi", "EN002", {"course": "CS101"})
    )
    store.upsert_group(GroupProfile("cs101", (("course", "CS101"),)))


def test_compose_multicast_personalizes(store):
    seed_group(store)
    scheduler = Scheduler(store)
    campaign, ids = scheduler.compose_multicast(
        "Hi {name}, seminar at 3pm", "cs101", 500, "admin"
    )
    assert len(ids) == 2
    bodies = {store.get_message(i).body for i in ids}
    assert bodies == {"Hi Asha, seminar at 3pm", "Hi Ravi, seminar at 3pm"}
    assert all(store.get_message(i).status == N for i in ids)
    assert all(store.get_message(i).campaign_id == campaign.campaign_id for i in ids)
    assert all(store.get_message(i).schedule_time == 500 for i in ids)


def test_compose_multicast_all_or_nothing(store):
    seed_group(store)
    store.upsert_recipient(
        RecipientProfile("+911234500003", "NoDept", "EN003", {"course": "CS101"})
    )
    store.upsert_recipient(
        RecipientProfile(
            "+911234500000", "HasDept", "EN000", {"course": "CS101", "dept": "CSE"}
        )
    )
    scheduler = Scheduler(store)
    with pytest.raises(UnknownPlaceholder):
        scheduler.compose_multicast("Hi {name} of {dept}", "cs101", 0, "admin")
    assert store.list_messages() == []


def test_compose_multicast_unknown_group(store):
    scheduler = Scheduler(store)
    with pytest.raises(UnknownGroup):
        scheduler.compose_multicast("hi", "nope", 0, "admin")


def test_compose_multicast_empty_group(store):
    store.upsert_group(GroupProfile("ghosts", (("course", "NONE"),)))
    scheduler = Scheduler(store)
    with pytest.raises(EmptyGroup):
        scheduler.compose_multicast("hi", "ghosts", 0, "admin")


def test_campaign_ids_are_distinct(store):
    seed_group(store)
    scheduler = Scheduler(store)
    c1, _ = scheduler.compose_multicast("a {name}", "cs101", 0, "admin")
    c2, _ = scheduler.compose_multicast("b {name}", "cs101", 0, "admin")
    assert c1.campaign_id != c2.campaign_id
