"""Feed service core: the web-service tier between store and clients.

Handlers are transport-free; the HTTP layer in http_api wraps them.
Delivery clients speak the XML protocol (fetching a batch claims it —
there is no separate reserve call); the admin surface speaks JSON.
"""

from __future__ import annotations

from typing import Callable

from campus_sms.commands import CommandRouter
from campus_sms.errors import EmptyBody, NotClaimedByWorker, UnknownMessage
from campus_sms.models import (
    AttemptOutcome,
    GroupProfile,
    Message,
    RecipientProfile,
    StatusFlag,
    validate_msisdn,
)
from campus_sms.scheduler import Scheduler
from campus_sms.storage.base import MessageStore
from campus_sms.wire import (
    AckDocument,
    AckItem,
    BatchEnvelope,
    BatchItem,
    StatusReport,
    parse_report,
    serialize_ack,
    serialize_batch,
)


def message_to_dict(message: Message) -> dict:
    return {
        "id": message.id,
        "to": message.recipient,
        "body": message.body,
        "schedule_time": message.schedule_time,
        "status": int(message.status),
        "status_name": message.status.label,
        "claimed_by": message.claimed_by,
        "claimed_at": message.claimed_at,
        "attempts": message.attempts,
        "created_by": message.created_by,
        "campaign_id": message.campaign_id,
    }


class FeedService:
    def __init__(
        self,
        store: MessageStore,
        scheduler: Scheduler,
        router: CommandRouter,
        clock,
        on_recipient_added: Callable[[RecipientProfile], None] | None = None,
    ):
        self.store = store
        self.scheduler = scheduler
        self.router = router
        self.clock = clock
        self._on_recipient_added = on_recipient_added

    # -- client XML protocol ------------------------------------------

    def outbox_xml(self, worker_id: str, max_items: int) -> str:
        """Claim a batch for the worker and serialize it; an empty
        envelope is the idle signal, not an error."""
        if not worker_id:
            raise ValueError("worker_id is required")
        max_items = max(1, min(int(max_items), self.scheduler.config.max_batch))
        now = self.clock.now
        claimed = self.scheduler.claim_batch(now, worker_id, max_items)
        envelope = BatchEnvelope(
            worker=worker_id,
            ts=now,
            items=tuple(BatchItem(m.id, m.recipient, m.body) for m in claimed),
        )
        return serialize_batch(envelope)

    def report_xml(self, xml_text: str) -> str:
        """Apply a status report, acknowledging every item individually.

        Raises MalformedDocument for documents that do not parse; unknown
        ids and stale claims are per-item ack results, never request
        failures.
        """
        report = parse_report(xml_text)
        now = self.clock.now
        acks = []
        for item in report.items:
            outcome = (
                AttemptOutcome.DELIVERED if item.status == 3 else AttemptOutcome.LOST
            )
            try:
                resulting = self.scheduler.report_outcome(
                    report.worker, item.id, outcome, now=now
                )
            except UnknownMessage:
                acks.append(AckItem(item.id, "unknown"))
                continue
            except NotClaimedByWorker:
                acks.append(AckItem(item.id, "ignored"))
                continue
            result = {
                StatusFlag.SENT: "ok",
                StatusFlag.NEW: "requeued",
                StatusFlag.FAILED: "dead",
            }[resulting]
            acks.append(AckItem(item.id, result))
        return serialize_ack(AckDocument(items=tuple(acks)))

    def inbound(self, from_msisdn: str, body: str) -> int:
        """Log an inbound SMS, execute its command, and enqueue the reply
        back to the sender for immediate delivery. Returns the reply
        message id. Raises MalformedRecipient for a bad sender."""
        sender = validate_msisdn(from_msisdn)
        now = self.clock.now
        reply_text = self.router.execute_body(body, sender, now)
        reply_id = self.store.insert_message(
            sender, reply_text, schedule_time=now, created_by="system"
        )
        self.store.log_inbound(sender, body, now, reply_id)
        return reply_id

    # -- admin API ------------------------------------------------------

    def submit_message(self, to: str, body: str, schedule_time: int, created_by: str) -> dict:
        mid = self.store.insert_message(to, body, int(schedule_time), created_by)
        return {"id": mid, "status": 0}

    def submit_campaign(
        self, template: str, group_id: str, schedule_time: int, created_by: str
    ) -> dict:
        if not (template or "").strip():
            raise EmptyBody("campaign template is empty")
        campaign, ids = self.scheduler.compose_multicast(
            template, group_id, int(schedule_time), created_by
        )
        return {"campaign_id": campaign.campaign_id, "count": len(ids)}

    def list_messages(self, status: int | None = None) -> list[dict]:
        flag = StatusFlag(status) if status is not None else None
        return [message_to_dict(m) for m in self.store.list_messages(status=flag)]

    def message_detail(self, message_id: int) -> dict:
        message = self.store.get_message(message_id)  # raises UnknownMessage
        detail = message_to_dict(message)
        detail["attempt_log"] = [
            {
                "worker": a.worker,
                "started_at": a.started_at,
                "finished_at": a.finished_at,
                "outcome": a.outcome.value,
            }
            for a in self.store.attempts_for(message_id)
        ]
        return detail

    def create_recipient(
        self,
        msisdn: str,
        name: str,
        enrolment_no: str | None = None,
        attributes: dict | None = None,
    ) -> dict:
        profile = RecipientProfile(
            msisdn=validate_msisdn(msisdn),
            name=str(name),
            enrolment_no=enrolment_no,
            attributes={str(k): str(v) for k, v in (attributes or {}).items()},
        )
        self.store.upsert_recipient(profile)
        if self._on_recipient_added is not None:
            self._on_recipient_added(profile)
        return {"msisdn": profile.msisdn}

    def list_recipients(self) -> list[dict]:
        return [
            {
                "msisdn": p.msisdn,
                "name": p.name,
                "enrolment_no": p.enrolment_no,
                "attributes": dict(p.attributes),
            }
            for p in self.store.list_recipients()
        ]

    def create_group(self, group_id: str, predicate: dict | None = None) -> dict:
        if not (group_id or "").strip():
            raise ValueError("group_id is required")
        pairs = tuple((str(k), str(v)) for k, v in (predicate or {}).items())
        self.store.upsert_group(GroupProfile(group_id=group_id, predicate=pairs))
        return {"group_id": group_id}

    def list_groups(self) -> list[dict]:
        groups = []
        for group in self.store.list_groups():
            groups.append(
                {
                    "group_id": group.group_id,
                    "predicate": {attr: value for attr, value in group.predicate},
                    "size": len(self.store.resolve_group(group.group_id)),
                }
            )
        return groups

    def inbound_entries(self) -> list[dict]:
        entries = []
        for record in self.store.inbound_log():
            reply_body = None
            reply_status = None
            if record.reply_message_id is not None:
                try:
                    reply = self.store.get_message(record.reply_message_id)
                    reply_body = reply.body
                    reply_status = int(reply.status)
                except UnknownMessage:
                    pass
            entries.append(
                {
                    "id": record.id,
                    "from": record.from_msisdn,
                    "body": record.body,
                    "received_at": record.received_at,
                    "reply_message_id": record.reply_message_id,
                    "reply_body": reply_body,
                    "reply_status": reply_status,
                }
            )
        return entries
