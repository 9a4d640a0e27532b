from __future__ import annotations

import pytest
from fastapi.testclient import TestClient

from campus_sms.commands import HELP_TEXT
from campus_sms.http_api import create_app
from campus_sms.models import MarksRecord, RecipientProfile, StatusFlag
from campus_sms.system import System, SystemConfig
from campus_sms.wire import parse_ack, parse_batch

ASHA = "+911234500001"


@pytest.fixture
def system():
    sys = System(SystemConfig(store_path="memory", backoff_ticks=60, max_retries=3))
    sys.service.create_recipient(ASHA, "Asha", "EN001", {"course": "CS101"})
    sys.store.upsert_marks(MarksRecord("EN001", (("Maths", 71), ("Physics", 64))))
    yield sys
    sys.close()


@pytest.fixture
def api(system):
    return TestClient(create_app(system.service))


def test_outbox_serves_claimed_batch(system, api):
    system.service.submit_message(ASHA, "Exam on 12 May", 0, "admin")
    system.clock.advance_to(120)
    response = api.get("/api/outbox", params={"worker": "w1", "max": 5})
    assert response.status_code == 200
    assert response.headers["content-type"].startswith("application/xml")
    envelope = parse_batch(response.text)
    assert envelope.worker == "w1" and envelope.ts == 120
    assert [(i.id, i.to, i.body) for i in envelope.items] == [
        (1, ASHA, "Exam on 12 May")
    ]
    # fetching claims: the row is now Processing under w1
    msg = system.store.get_message(1)
    assert msg.status == StatusFlag.PROCESSING and msg.claimed_by == "w1"


def test_outbox_empty_envelope(api):
    response = api.get("/api/outbox", params={"worker": "w1"})
    assert response.status_code == 200
    assert parse_batch(response.text).items == ()


def test_outbox_requires_worker(api):
    assert api.get("/api/outbox").status_code == 400


def test_outbox_never_hands_same_id_to_two_workers(system, api):
    system.service.submit_message(ASHA, "x", 0, "admin")
    first = parse_batch(api.get("/api/outbox", params={"worker": "w1"}).text)
    second = parse_batch(api.get("/api/outbox", params={"worker": "w2"}).text)
    assert len(first.items) == 1
    assert second.items == ()


def test_report_success_ack(system, api):
    system.service.submit_message(ASHA, "x", 0, "admin")
    api.get("/api/outbox", params={"worker": "w1"})
    response = api.post(
        "/api/report",
        content='<report worker="w1"><sms id="1" status="3"/></report>',
        headers={"Content-Type": "application/xml"},
    )
    assert response.status_code == 200
    ack = parse_ack(response.text)
    assert [(a.id, a.result) for a in ack.items] == [(1, "ok")]
    assert system.store.get_message(1).status == StatusFlag.SENT


def test_report_failure_requeues(system, api):
    system.service.submit_message(ASHA, "x", 0, "admin")
    system.clock.advance_to(10)
    api.get("/api/outbox", params={"worker": "w1"})
    ack = parse_ack(
        api.post(
            "/api/report",
            content='<report worker="w1"><sms id="1" status="2"/></report>',
        ).text
    )
    assert [(a.id, a.result) for a in ack.items] == [(1, "requeued")]
    msg = system.store.get_message(1)
    assert msg.status == StatusFlag.NEW
    assert msg.schedule_time == 70  # report arrived at tick 10, backoff 60


def test_report_unknown_id_is_per_item(api):
    ack = parse_ack(
        api.post(
            "/api/report",
            content='<report worker="w1"><sms id="999" status="3"/></report>',
        ).text
    )
    assert [(a.id, a.result) for a in ack.items] == [(999, "unknown")]


def test_report_stale_claim_ignored(system, api):
    system.service.submit_message(ASHA, "x", 0, "admin")
    api.get("/api/outbox", params={"worker": "w1"})
    system.clock.advance_to(400)
    system.scheduler.sweep(400)  # w1's lease expires
    api.get("/api/outbox", params={"worker": "w2"})
    ack = parse_ack(
        api.post(
            "/api/report",
            content='<report worker="w1"><sms id="1" status="3"/></report>',
        ).text
    )
    assert [(a.id, a.result) for a in ack.items] == [(1, "ignored")]
    assert system.store.get_message(1).claimed_by == "w2"


def test_report_malformed_is_400(api):
    assert api.post("/api/report", content="<oops").status_code == 400
    assert (
        api.post(
            "/api/report", content='<report worker="w"><sms id="1" status="1"/></report>'
        ).status_code
        == 400
    )


def test_report_dead_after_budget(system, api):
    system.service.submit_message(ASHA, "x", 0, "admin")
    tick = 0
    for i in range(4):
        tick += 100
        system.clock.advance_to(tick)
        batch = parse_batch(api.get("/api/outbox", params={"worker": "w1"}).text)
        assert len(batch.items) == 1
        ack = parse_ack(
            api.post(
                "/api/report",
                content='<report worker="w1"><sms id="1" status="2"/></report>',
            ).text
        )
    assert [(a.id, a.result) for a in ack.items] == [(1, "dead")]
    assert system.store.get_message(1).status == StatusFlag.FAILED


# -- inbound -----------------------------------------------------------


def test_inbound_enqueues_reply(system, api):
    system.clock.advance_to(50)
    response = api.post(
        "/api/inbound", content="from=%2B911234500001&body=result%20EN001"
    )
    assert response.status_code == 204
    log = system.store.inbound_log()
    assert len(log) == 1
    assert log[0].body == "result EN001"
    reply = system.store.get_message(log[0].reply_message_id)
    assert reply.recipient == ASHA
    assert reply.body == "EN001\nMaths:71\nPhysics:64"
    assert reply.schedule_time == 50  # immediate
    assert reply.status == StatusFlag.NEW


def test_inbound_unknown_command_replies_help(system, api):
    api.post("/api/inbound", content="from=%2B911234500001&body=garbage")
    log = system.store.inbound_log()
    assert system.store.get_message(log[0].reply_message_id).body == HELP_TEXT


def test_inbound_malformed_sender(system, api):
    response = api.post("/api/inbound", content="from=12ab&body=hello")
    assert response.status_code == 400
    assert system.store.inbound_log() == []
    assert system.store.list_messages() == []


def test_inbound_exactly_one_log_and_reply_per_sms(system, api):
    for _ in range(3):
        api.post("/api/inbound", content="from=%2B911234500001&body=result%20EN001")
    log = system.store.inbound_log()
    assert len(log) == 3
    assert len({r.reply_message_id for r in log}) == 3


# -- admin API ----------------------------------------------------------


def test_submit_message_endpoint(api):
    response = api.post(
        "/api/messages",
        json={"to": ASHA, "body": "hello", "schedule_time": 9},
        headers={"X-Admin": "registrar"},
    )
    assert response.status_code == 200
    assert response.json() == {"id": 1, "status": 0}


def test_submit_message_validation(api):
    assert (
        api.post("/api/messages", json={"to": "nope", "body": "x", "schedule_time": 0}).status_code
        == 400
    )
    assert (
        api.post("/api/messages", json={"to": ASHA, "body": " ", "schedule_time": 0}).status_code
        == 400
    )
    assert api.post("/api/messages", json={"to": ASHA}).status_code == 400


def test_message_listing_filters_by_status(system, api):
    api.post("/api/messages", json={"to": ASHA, "body": "a", "schedule_time": 0})
    api.post("/api/messages", json={"to": ASHA, "body": "b", "schedule_time": 0})
    api.get("/api/outbox", params={"worker": "w1", "max": 1})
    processing = api.get("/api/messages", params={"status": 1}).json()["messages"]
    assert [m["id"] for m in processing] == [1]
    fresh = api.get("/api/messages", params={"status": 0}).json()["messages"]
    assert [m["id"] for m in fresh] == [2]
    assert api.get("/api/messages", params={"status": 7}).status_code == 400


def test_message_detail_with_attempts(system, api):
    api.post("/api/messages", json={"to": ASHA, "body": "a", "schedule_time": 0})
    api.get("/api/outbox", params={"worker": "w1"})
    api.post("/api/report", content='<report worker="w1"><sms id="1" status="3"/></report>')
    detail = api.get("/api/messages/1").json()
    assert detail["status_name"] == "Sent"
    assert detail["created_by"] == "admin"
    assert len(detail["attempt_log"]) == 1
    assert detail["attempt_log"][0]["outcome"] == "Delivered"
    assert api.get("/api/messages/999").status_code == 404


def test_campaign_endpoint(system, api):
    api.post(
        "/api/recipients",
        json={"msisdn": "+911234500002", "name": "Ravi", "attributes": {"course": "CS101"}},
    )
    api.post("/api/groups", json={"group_id": "cs101", "predicate": {"course": "CS101"}})
    response = api.post(
        "/api/campaigns",
        json={"template": "Hi {name}", "group_id": "cs101", "schedule_time": 5},
    )
    assert response.status_code == 200
    payload = response.json()
    assert payload["count"] == 2
    assert payload["campaign_id"]
    assert api.post(
        "/api/campaigns", json={"template": "x", "group_id": "nope", "schedule_time": 0}
    ).status_code == 404
    assert api.post(
        "/api/campaigns",
        json={"template": "Hi {dept}", "group_id": "cs101", "schedule_time": 0},
    ).status_code == 400


def test_groups_and_recipients_round_trip(api):
    api.post("/api/recipients", json={"msisdn": "+911234500005", "name": "Zed"})
    recipients = api.get("/api/recipients").json()["recipients"]
    assert any(r["msisdn"] == "+911234500005" for r in recipients)
    api.post("/api/groups", json={"group_id": "everyone"})
    groups = api.get("/api/groups").json()["groups"]
    everyone = next(g for g in groups if g["group_id"] == "everyone")
    assert everyone["size"] == len(recipients)
    assert api.post("/api/recipients", json={"msisdn": "bad", "name": "X"}).status_code == 400


def test_inbound_log_endpoint_pairs_replies(system, api):
    api.post("/api/inbound", content="from=%2B911234500001&body=result%20EN001")
    entries = api.get("/api/inbound-log").json()["entries"]
    assert len(entries) == 1
    assert entries[0]["from"] == ASHA
    assert entries[0]["body"] == "result EN001"
    assert entries[0]["reply_body"] == "EN001\nMaths:71\nPhysics:64"


def test_new_recipient_gets_a_handset(system, api):
    api.post("/api/recipients", json={"msisdn": "+911234500009", "name": "New"})
    assert system.sim.is_registered("+911234500009")
