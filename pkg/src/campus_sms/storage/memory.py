"""Dict-based store used by property tests and throwaway runs."""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Sequence

from campus_sms.errors import (
    UnknownGroup,
    UnknownMessage,
    UnknownRecipient,
)
from campus_sms.models import (
    AttemptOutcome,
    AttemptRecord,
    COUNTED_OUTCOMES,
    GroupProfile,
    InboundRecord,
    MarksRecord,
    Message,
    QuizCursor,
    QuizQuestion,
    RecipientProfile,
    StatusFlag,
    TransitionRecord,
)
from campus_sms.storage.base import (
    MessageStore,
    check_edge,
    check_new_message,
    next_qid_for,
)


@dataclass
class _Row:
    id: int
    recipient: str
    body: str
    schedule_time: int
    status: StatusFlag
    claimed_by: str | None
    claimed_at: int | None
    attempts: int
    created_by: str
    campaign_id: str | None

    def snapshot(self) -> Message:
        return Message(
            id=self.id,
            recipient=self.recipient,
            body=self.body,
            schedule_time=self.schedule_time,
            status=self.status,
            claimed_by=self.claimed_by,
            claimed_at=self.claimed_at,
            attempts=self.attempts,
            created_by=self.created_by,
            campaign_id=self.campaign_id,
        )


class MemoryStore(MessageStore):
    def __init__(self):
        self._lock = threading.RLock()
        self._rows: dict[int, _Row] = {}
        self._next_id = 1
        self._attempts: list[AttemptRecord] = []
        self._transitions: list[TransitionRecord] = []
        self._recipients: dict[str, RecipientProfile] = {}
        self._groups: dict[str, GroupProfile] = {}
        self._marks: dict[str, MarksRecord] = {}
        self._quiz: dict[tuple[str, int], QuizQuestion] = {}
        self._cursors: dict[tuple[str, str], tuple[int, frozenset[int]]] = {}
        self._active_course: dict[str, str] = {}
        self._inbound: list[InboundRecord] = []

    # -- messages ----------------------------------------------------

    def insert_message(self, recipient, body, schedule_time, created_by, campaign_id=None):
        with self._lock:
            return self._insert(recipient, body, schedule_time, created_by, campaign_id)

    def insert_messages(self, rows: Sequence[tuple[str, str, int, str, str | None]]):
        with self._lock:
            # validate everything before touching state: all-or-nothing
            for recipient, body, _, _, _ in rows:
                check_new_message(recipient, body)
            return [self._insert(*row) for row in rows]

    def _insert(self, recipient, body, schedule_time, created_by, campaign_id=None) -> int:
        msisdn = check_new_message(recipient, body)
        row = _Row(
            id=self._next_id,
            recipient=msisdn,
            body=body,
            schedule_time=int(schedule_time),
            status=StatusFlag.NEW,
            claimed_by=None,
            claimed_at=None,
            attempts=0,
            created_by=created_by,
            campaign_id=campaign_id,
        )
        self._rows[row.id] = row
        self._next_id += 1
        return row.id

    def get_message(self, message_id):
        with self._lock:
            return self._row(message_id).snapshot()

    def _row(self, message_id: int) -> _Row:
        row = self._rows.get(message_id)
        if row is None:
            raise UnknownMessage(f"no message {message_id}")
        return row

    def list_messages(self, status=None, campaign_id=None):
        with self._lock:
            rows = sorted(self._rows.values(), key=lambda r: r.id)
            if status is not None:
                rows = [r for r in rows if r.status == status]
            if campaign_id is not None:
                rows = [r for r in rows if r.campaign_id == campaign_id]
            return [r.snapshot() for r in rows]

    def transition(self, message_id, from_status, to_status, worker=None, at=0):
        from_status = StatusFlag(from_status)
        to_status = StatusFlag(to_status)
        check_edge(from_status, to_status)
        if from_status == StatusFlag.NEW and to_status == StatusFlag.PROCESSING and not worker:
            raise ValueError("claiming 0->1 requires a worker id")
        with self._lock:
            row = self._row(message_id)
            if row.status != from_status:
                return False
            if from_status == StatusFlag.PROCESSING and worker is not None:
                if row.claimed_by != worker:
                    return False
            row.status = to_status
            if to_status == StatusFlag.PROCESSING:
                row.claimed_by = worker
                row.claimed_at = int(at)
            elif from_status == StatusFlag.PROCESSING:
                row.claimed_by = None
                row.claimed_at = None
            self._transitions.append(
                TransitionRecord(message_id, from_status, to_status, worker, int(at))
            )
            return True

    def requeue(self, message_id, new_schedule_time, at=0):
        with self._lock:
            row = self._row(message_id)
            if row.status != StatusFlag.FAILED:
                return False
            row.status = StatusFlag.NEW
            row.schedule_time = int(new_schedule_time)
            self._transitions.append(
                TransitionRecord(message_id, StatusFlag.FAILED, StatusFlag.NEW, None, int(at))
            )
            return True

    def due_new(self, now, limit):
        if limit < 1:
            raise ValueError("limit must be >= 1")
        with self._lock:
            due = [
                r
                for r in self._rows.values()
                if r.status == StatusFlag.NEW and r.schedule_time <= now
            ]
            due.sort(key=lambda r: (r.schedule_time, r.id))
            return [r.snapshot() for r in due[:limit]]

    def expire_leases(self, now, lease_duration):
        if lease_duration <= 0:
            raise ValueError("lease_duration must be > 0")
        with self._lock:
            reclaimed = 0
            for row in sorted(self._rows.values(), key=lambda r: r.id):
                if row.status != StatusFlag.PROCESSING:
                    continue
                if row.claimed_at is None or row.claimed_at + lease_duration > now:
                    continue
                worker, started = row.claimed_by, row.claimed_at
                row.status = StatusFlag.NEW
                row.claimed_by = None
                row.claimed_at = None
                self._transitions.append(
                    TransitionRecord(
                        row.id, StatusFlag.PROCESSING, StatusFlag.NEW, worker, int(now)
                    )
                )
                self._attempts.append(
                    AttemptRecord(row.id, worker or "", started, int(now), AttemptOutcome.EXPIRED)
                )
                reclaimed += 1
            return reclaimed

    def record_attempt(self, message_id, worker, started_at, finished_at, outcome):
        outcome = AttemptOutcome(outcome)
        if finished_at < started_at:
            raise ValueError("finished_at must be >= started_at")
        with self._lock:
            row = self._row(message_id)
            self._attempts.append(
                AttemptRecord(message_id, worker, int(started_at), int(finished_at), outcome)
            )
            if outcome in COUNTED_OUTCOMES:
                row.attempts += 1

    def attempts_for(self, message_id):
        with self._lock:
            return [a for a in self._attempts if a.message_id == message_id]

    def transition_log(self):
        with self._lock:
            return list(self._transitions)

    def status_counts(self):
        with self._lock:
            counts = {flag: 0 for flag in StatusFlag}
            for row in self._rows.values():
                counts[row.status] += 1
            return counts

    # -- recipients and groups ---------------------------------------

    def upsert_recipient(self, profile):
        with self._lock:
            self._recipients[profile.msisdn] = profile

    def get_recipient(self, msisdn):
        profile = self.find_recipient(msisdn)
        if profile is None:
            raise UnknownRecipient(f"no recipient {msisdn}")
        return profile

    def find_recipient(self, msisdn):
        with self._lock:
            return self._recipients.get(msisdn)

    def recipient_by_enrolment(self, enrolment_no):
        with self._lock:
            for profile in self._recipients.values():
                if profile.enrolment_no == enrolment_no:
                    return profile
            return None

    def list_recipients(self):
        with self._lock:
            return sorted(self._recipients.values(), key=lambda p: p.msisdn)

    def upsert_group(self, group):
        with self._lock:
            self._groups[group.group_id] = group

    def get_group(self, group_id):
        with self._lock:
            group = self._groups.get(group_id)
            if group is None:
                raise UnknownGroup(f"no group {group_id}")
            return group

    def list_groups(self):
        with self._lock:
            return sorted(self._groups.values(), key=lambda g: g.group_id)

    def resolve_group(self, group_id):
        with self._lock:
            group = self.get_group(group_id)
            return [p for p in self.list_recipients() if group.matches(p)]

    # -- marks and quiz ----------------------------------------------

    def upsert_marks(self, record):
        with self._lock:
            if self.recipient_by_enrolment(record.enrolment_no) is None:
                raise UnknownRecipient(f"no recipient with enrolment {record.enrolment_no}")
            self._marks[record.enrolment_no] = record

    def marks_for(self, enrolment_no):
        with self._lock:
            return self._marks.get(enrolment_no)

    def upsert_quiz_question(self, question):
        with self._lock:
            self._quiz[(question.course, question.qid)] = question

    def quiz_questions(self, course):
        with self._lock:
            return sorted(
                (q for (c, _), q in self._quiz.items() if c == course), key=lambda q: q.qid
            )

    def quiz_courses(self):
        with self._lock:
            return sorted({c for c, _ in self._quiz})

    def get_quiz_cursor(self, msisdn, course):
        with self._lock:
            state = self._cursors.get((msisdn, course))
            if state is None:
                return None
            score, answered = state
            return QuizCursor(
                msisdn=msisdn,
                course=course,
                next_qid=next_qid_for(self.quiz_questions(course), answered),
                score=score,
                answered=answered,
            )

    def save_quiz_cursor(self, cursor, make_active=False):
        with self._lock:
            self._cursors[(cursor.msisdn, cursor.course)] = (
                cursor.score,
                frozenset(cursor.answered),
            )
            if make_active:
                self._active_course[cursor.msisdn] = cursor.course

    def active_quiz_course(self, msisdn):
        with self._lock:
            return self._active_course.get(msisdn)

    # -- inbound log --------------------------------------------------

    def log_inbound(self, from_msisdn, body, received_at, reply_message_id):
        with self._lock:
            record = InboundRecord(
                id=len(self._inbound) + 1,
                from_msisdn=from_msisdn,
                body=body,
                received_at=int(received_at),
                reply_message_id=reply_message_id,
            )
            self._inbound.append(record)
            return record.id

    def inbound_log(self):
        with self._lock:
            return list(self._inbound)

    def close(self):
        pass
