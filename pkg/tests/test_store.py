from __future__ import annotations

import threading

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from campus_sms.errors import (
    EmptyBody,
    IllegalEdge,
    MalformedRecipient,
    UnknownGroup,
    UnknownMessage,
    UnknownRecipient,
)
from campus_sms.models import (
    AttemptOutcome,
    GroupProfile,
    LEGAL_EDGES,
    MarksRecord,
    RecipientProfile,
    StatusFlag,
    validate_msisdn,
)

N = StatusFlag.NEW
P = StatusFlag.PROCESSING
F = StatusFlag.FAILED
S = StatusFlag.SENT


def test_first_insert_gets_new_status(store):
    mid = store.insert_message("+911234500001", "Exam on 12 May", 100, "admin")
    assert mid == 1
    msg = store.get_message(mid)
    assert msg.status == N
    assert msg.attempts == 0
    assert msg.claimed_by is None and msg.claimed_at is None


def test_empty_recipient_rejected(store):
    with pytest.raises(MalformedRecipient):
        store.insert_message("", "hi", 0, "admin")


def test_ids_strictly_increasing(store):
    a = store.insert_message("+911234500001", "one", 0, "admin")
    b = store.insert_message("+911234500001", "two", 0, "admin")
    assert (a, b) == (1, 2)


def test_empty_body_rejected(store):
    with pytest.raises(EmptyBody):
        store.insert_message("+911234500001", "   ", 0, "admin")


@pytest.mark.parametrize(
    "bad", ["12ab", "+12345", "911234500001", "+1234567890123456", "+", "+91 123"]
)
def test_malformed_recipients(store, bad):
    with pytest.raises(MalformedRecipient):
        store.insert_message(bad, "hi", 0, "admin")


@given(st.from_regex(r"\+\d{8,15}", fullmatch=True))
def test_valid_msisdns_accepted(msisdn):
    assert validate_msisdn(msisdn) == msisdn


# -- transitions ------------------------------------------------------


def test_claim_records_worker(store):
    mid = store.insert_message("+911234500001", "x", 0, "admin")
    assert store.transition(mid, N, P, worker="w1", at=5) is True
    msg = store.get_message(mid)
    assert msg.status == P
    assert msg.claimed_by == "w1"
    assert msg.claimed_at == 5


def test_second_claim_loses_race(store):
    mid = store.insert_message("+911234500001", "x", 0, "admin")
    assert store.transition(mid, N, P, worker="w1", at=5)
    assert store.transition(mid, N, P, worker="w2", at=5) is False
    assert store.get_message(mid).claimed_by == "w1"


def test_skipping_claim_is_illegal(store):
    mid = store.insert_message("+911234500001", "x", 0, "admin")
    with pytest.raises(IllegalEdge):
        store.transition(mid, N, S)


def test_illegal_edge_rejected_regardless_of_state(store):
    mid = store.insert_message("+911234500001", "x", 0, "admin")
    with pytest.raises(IllegalEdge):
        store.transition(mid, S, N)


def test_unknown_message(store):
    with pytest.raises(UnknownMessage):
        store.transition(99, N, P, worker="w1")
    with pytest.raises(UnknownMessage):
        store.get_message(99)


def test_leaving_processing_clears_claim(store):
    mid = store.insert_message("+911234500001", "x", 0, "admin")
    store.transition(mid, N, P, worker="w1", at=5)
    assert store.transition(mid, P, S, worker="w1", at=6)
    msg = store.get_message(mid)
    assert msg.status == S
    assert msg.claimed_by is None and msg.claimed_at is None


def test_worker_predicate_on_leaving_processing(store):
    mid = store.insert_message("+911234500001", "x", 0, "admin")
    store.transition(mid, N, P, worker="w1", at=5)
    # another worker cannot complete somebody else's claim
    assert store.transition(mid, P, S, worker="w2", at=6) is False
    assert store.get_message(mid).status == P


def test_sent_is_terminal(store):
    mid = store.insert_message("+911234500001", "x", 0, "admin")
    store.transition(mid, N, P, worker="w1")
    store.transition(mid, P, S, worker="w1")
    for frm, to in LEGAL_EDGES:
        assert store.transition(mid, frm, to, worker="w1") is False
    assert store.get_message(mid).status == S


def test_claim_requires_worker(store):
    mid = store.insert_message("+911234500001", "x", 0, "admin")
    with pytest.raises(ValueError):
        store.transition(mid, N, P)


def test_transition_audit_log(store):
    mid = store.insert_message("+911234500001", "x", 0, "admin")
    store.transition(mid, N, P, worker="w1", at=1)
    store.transition(mid, P, F, worker="w1", at=2)
    store.requeue(mid, 62, at=2)
    log = store.transition_log()
    edges = [(t.from_status, t.to_status) for t in log]
    assert edges == [(N, P), (P, F), (F, N)]
    assert all((t.from_status, t.to_status) in LEGAL_EDGES for t in log)


def test_requeue_moves_schedule(store):
    mid = store.insert_message("+911234500001", "x", 10, "admin")
    store.transition(mid, N, P, worker="w1", at=10)
    store.transition(mid, P, F, worker="w1", at=12)
    assert store.requeue(mid, 72, at=12) is True
    msg = store.get_message(mid)
    assert msg.status == N
    assert msg.schedule_time == 72
    # requeue only applies to Failed rows
    assert store.requeue(mid, 100, at=13) is False


def test_cas_hammer_single_winner(store):
    """Only one of many concurrent claimants may win each epoch."""
    mid = store.insert_message("+911234500001", "x", 0, "admin")
    wins = []
    barrier = threading.Barrier(8)

    def claim(worker):
        barrier.wait()
        if store.transition(mid, N, P, worker=worker, at=0):
            wins.append(worker)

    threads = [threading.Thread(target=claim, args=(f"w{i}",)) for i in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert len(wins) == 1
    assert store.get_message(mid).claimed_by == wins[0]


def test_cas_hammer_many_messages(store):
    ids = [store.insert_message("+911234500001", f"m{i}", 0, "admin") for i in range(50)]
    claimed: dict[int, list[str]] = {mid: [] for mid in ids}
    lock = threading.Lock()

    def run(worker):
        for mid in ids:
            if store.transition(mid, N, P, worker=worker, at=0):
                with lock:
                    claimed[mid].append(worker)

    threads = [threading.Thread(target=run, args=(f"w{i}",)) for i in range(6)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert all(len(winners) == 1 for winners in claimed.values())


# -- due_new ----------------------------------------------------------


def test_not_yet_due(store):
    store.insert_message("+911234500001", "x", 100, "admin")
    assert store.due_new(50, 10) == []


def test_due_tie_broken_by_id(store):
    store.insert_message("+911234500001", "first", 10, "admin")
    store.insert_message("+911234500002", "second", 10, "admin")
    due = store.due_new(20, 10)
    assert [m.id for m in due] == [1, 2]


def test_due_limit(store):
    for i in range(5):
        store.insert_message("+911234500001", f"m{i}", i, "admin")
    due = store.due_new(100, 2)
    assert [m.id for m in due] == [1, 2]


def test_due_never_returns_claimed_or_future(store):
    a = store.insert_message("+911234500001", "due", 0, "admin")
    store.insert_message("+911234500001", "future", 50, "admin")
    store.transition(a, N, P, worker="w1", at=0)
    due = store.due_new(10, 10)
    assert due == []


def test_due_limit_validation(store):
    with pytest.raises(ValueError):
        store.due_new(0, 0)


# -- leases -----------------------------------------------------------


def test_lease_not_yet_expired(store):
    mid = store.insert_message("+911234500001", "x", 0, "admin")
    store.transition(mid, N, P, worker="w1", at=0)
    assert store.expire_leases(299, 300) == 0
    assert store.get_message(mid).status == P


def test_lease_boundary_inclusive(store):
    mid = store.insert_message("+911234500001", "x", 0, "admin")
    store.transition(mid, N, P, worker="w1", at=0)
    assert store.expire_leases(300, 300) == 1
    msg = store.get_message(mid)
    assert msg.status == N
    assert msg.claimed_by is None
    attempts = store.attempts_for(mid)
    assert [a.outcome for a in attempts] == [AttemptOutcome.EXPIRED]
    assert msg.attempts == 0  # expiry is not a radio attempt


def test_expire_with_no_processing_rows(store):
    store.insert_message("+911234500001", "x", 0, "admin")
    assert store.expire_leases(1000, 300) == 0


# -- attempts ---------------------------------------------------------


def test_delivered_attempt_increments_counter(store):
    mid = store.insert_message("+911234500001", "x", 0, "admin")
    store.record_attempt(mid, "w1", 10, 12, AttemptOutcome.DELIVERED)
    assert store.get_message(mid).attempts == 1


def test_expired_attempt_does_not_count(store):
    mid = store.insert_message("+911234500001", "x", 0, "admin")
    store.record_attempt(mid, "w1", 10, 12, AttemptOutcome.EXPIRED)
    assert store.get_message(mid).attempts == 0


def test_attempt_unknown_message(store):
    with pytest.raises(UnknownMessage):
        store.record_attempt(99, "w1", 10, 12, AttemptOutcome.DELIVERED)


def test_attempt_counter_matches_log(store):
    mid = store.insert_message("+911234500001", "x", 0, "admin")
    store.record_attempt(mid, "w1", 1, 2, AttemptOutcome.LOST)
    store.record_attempt(mid, "w1", 3, 4, AttemptOutcome.EXPIRED)
    store.record_attempt(mid, "w2", 5, 6, AttemptOutcome.DELIVERED)
    counted = [
        a
        for a in store.attempts_for(mid)
        if a.outcome in (AttemptOutcome.DELIVERED, AttemptOutcome.LOST)
    ]
    assert store.get_message(mid).attempts == len(counted) == 2


# -- groups and registries ---------------------------------------------


def _seed_profiles(store):
    store.upsert_recipient(
        RecipientProfile("+911234500001", "Asha", "EN001", {"course": "CS101"})
    )
    store.upsert_recipient(
        RecipientProfile("+911234500002", "Ravi", "EN002", {"course": "CS101"})
    )
    store.upsert_recipient(
        RecipientProfile("+911234500003", "Meera", "EN003", {"course": "MA201"})
    )


def test_resolve_group_conjunctive(store):
    _seed_profiles(store)
    store.upsert_group(GroupProfile("cs101", (("course", "CS101"),)))
    members = store.resolve_group("cs101")
    assert [p.msisdn for p in members] == ["+911234500001", "+911234500002"]


def test_empty_predicate_matches_all(store):
    _seed_profiles(store)
    store.upsert_group(GroupProfile("all", ()))
    assert len(store.resolve_group("all")) == 3


def test_unknown_group(store):
    with pytest.raises(UnknownGroup):
        store.resolve_group("nope")


def test_group_ordering_by_msisdn(store):
    store.upsert_recipient(RecipientProfile("+911234500009", "Z"))
    store.upsert_recipient(RecipientProfile("+911234500001", "A"))
    store.upsert_group(GroupProfile("all", ()))
    msisdns = [p.msisdn for p in store.resolve_group("all")]
    assert msisdns == sorted(msisdns)


def test_marks_require_known_enrolment(store):
    with pytest.raises(UnknownRecipient):
        store.upsert_marks(MarksRecord("ZZ999", (("Maths", 50),)))


def test_marks_roundtrip_preserves_order(store):
    _seed_profiles(store)
    record = MarksRecord("EN001", (("Maths", 71), ("Physics", 64)))
    store.upsert_marks(record)
    assert store.marks_for("EN001") == record
    assert store.marks_for("ZZ999") is None


def test_recipient_upsert_idempotent(store):
    _seed_profiles(store)
    _seed_profiles(store)
    assert len(store.list_recipients()) == 3
