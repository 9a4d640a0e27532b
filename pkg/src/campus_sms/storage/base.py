"""Storage interface for the central message table and registries.

Two implementations exist: an embedded sqlite backend (persistent) and a
dict-based in-memory backend used by property tests. Both provide the
same transactional contract: ``transition`` is an atomic compare-and-set
and is the single atomicity point for the claim protocol; every other
mutation is internally consistent and safe for concurrent callers.

Tables / collections: messages, attempts, transitions (audit log),
recipients, groups, marks, quiz_questions, quiz_cursors, inbound_log.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from typing import Iterable, Sequence

from campus_sms.errors import EmptyBody, IllegalEdge
from campus_sms.models import (
    AttemptOutcome,
    AttemptRecord,
    GroupProfile,
    InboundRecord,
    MarksRecord,
    Message,
    QuizCursor,
    QuizQuestion,
    RecipientProfile,
    StatusFlag,
    TransitionRecord,
    is_legal_edge,
    validate_msisdn,
)


def check_new_message(recipient: str, body: str) -> str:
    """Validate an insert, returning the normalized recipient."""
    msisdn = validate_msisdn(recipient)
    if not (body or "").strip():
        raise EmptyBody("message body is empty")
    return msisdn


def check_edge(from_status: StatusFlag, to_status: StatusFlag) -> None:
    if not is_legal_edge(from_status, to_status):
        raise IllegalEdge(from_status, to_status)


def next_qid_for(questions: Iterable[QuizQuestion], answered: frozenset[int]) -> int | None:
    remaining = sorted(q.qid for q in questions if q.qid not in answered)
    return remaining[0] if remaining else None


class MessageStore(ABC):
    """Abstract store. All timestamps are caller-supplied logical ticks."""

    # -- messages ----------------------------------------------------

    @abstractmethod
    def insert_message(
        self,
        recipient: str,
        body: str,
        schedule_time: int,
        created_by: str,
        campaign_id: str | None = None,
    ) -> int:
        """Persist a new row with status New and attempts 0; ids are
        strictly increasing. Raises MalformedRecipient or EmptyBody."""

    @abstractmethod
    def insert_messages(
        self, rows: Sequence[tuple[str, str, int, str, str | None]]
    ) -> list[int]:
        """All-or-nothing bulk insert of (recipient, body, schedule_time,
        created_by, campaign_id) rows."""

    @abstractmethod
    def get_message(self, message_id: int) -> Message:
        """Raises UnknownMessage."""

    @abstractmethod
    def list_messages(
        self, status: StatusFlag | None = None, campaign_id: str | None = None
    ) -> list[Message]:
        """Snapshot ordered by id."""

    @abstractmethod
    def transition(
        self,
        message_id: int,
        from_status: StatusFlag,
        to_status: StatusFlag,
        worker: str | None = None,
        at: int = 0,
    ) -> bool:
        """Atomic compare-and-set along a legal lattice edge.

        Succeeds iff the current status equals ``from_status`` (and, when
        leaving Processing with ``worker`` given, the claim is held by that
        worker). On 0->1 the claim fields are recorded; on leaving 1 they
        are cleared. Returns False on a lost race. Raises UnknownMessage
        or IllegalEdge (the latter regardless of current status).
        """

    @abstractmethod
    def requeue(self, message_id: int, new_schedule_time: int, at: int = 0) -> bool:
        """CAS Failed->New that also moves schedule_time, atomically."""

    @abstractmethod
    def due_new(self, now: int, limit: int) -> list[Message]:
        """Status-New rows with schedule_time <= now, ordered by
        (schedule_time, id), at most ``limit``. Read-only."""

    @abstractmethod
    def expire_leases(self, now: int, lease_duration: int) -> int:
        """Reclaim every Processing row with claimed_at + lease_duration
        <= now: transition 1->0 and log an Expired attempt. Returns the
        number reclaimed."""

    @abstractmethod
    def record_attempt(
        self,
        message_id: int,
        worker: str,
        started_at: int,
        finished_at: int,
        outcome: AttemptOutcome,
    ) -> None:
        """Append to the attempt log; Delivered/Lost increment the
        message's attempts counter, Expired does not."""

    @abstractmethod
    def attempts_for(self, message_id: int) -> list[AttemptRecord]: ...

    @abstractmethod
    def transition_log(self) -> list[TransitionRecord]:
        """Full audit of committed lifecycle edges, in commit order."""

    @abstractmethod
    def status_counts(self) -> dict[StatusFlag, int]: ...

    # -- recipients and groups ---------------------------------------

    @abstractmethod
    def upsert_recipient(self, profile: RecipientProfile) -> None: ...

    @abstractmethod
    def get_recipient(self, msisdn: str) -> RecipientProfile:
        """Raises UnknownRecipient."""

    @abstractmethod
    def find_recipient(self, msisdn: str) -> RecipientProfile | None: ...

    @abstractmethod
    def recipient_by_enrolment(self, enrolment_no: str) -> RecipientProfile | None: ...

    @abstractmethod
    def list_recipients(self) -> list[RecipientProfile]:
        """Ordered by msisdn."""

    @abstractmethod
    def upsert_group(self, group: GroupProfile) -> None: ...

    @abstractmethod
    def get_group(self, group_id: str) -> GroupProfile:
        """Raises UnknownGroup."""

    @abstractmethod
    def list_groups(self) -> list[GroupProfile]: ...

    @abstractmethod
    def resolve_group(self, group_id: str) -> list[RecipientProfile]:
        """Profiles satisfying every predicate pair, ordered by msisdn.
        Raises UnknownGroup."""

    # -- marks and quiz ----------------------------------------------

    @abstractmethod
    def upsert_marks(self, record: MarksRecord) -> None:
        """Raises UnknownRecipient if the enrolment number is unknown."""

    @abstractmethod
    def marks_for(self, enrolment_no: str) -> MarksRecord | None: ...

    @abstractmethod
    def upsert_quiz_question(self, question: QuizQuestion) -> None: ...

    @abstractmethod
    def quiz_questions(self, course: str) -> list[QuizQuestion]:
        """Ordered by qid."""

    @abstractmethod
    def quiz_courses(self) -> list[str]: ...

    @abstractmethod
    def get_quiz_cursor(self, msisdn: str, course: str) -> QuizCursor | None: ...

    @abstractmethod
    def save_quiz_cursor(self, cursor: QuizCursor, make_active: bool = False) -> None:
        """Upsert by (msisdn, course); make_active marks this course as
        the handset's current quiz session."""

    @abstractmethod
    def active_quiz_course(self, msisdn: str) -> str | None: ...

    # -- inbound log --------------------------------------------------

    @abstractmethod
    def log_inbound(
        self, from_msisdn: str, body: str, received_at: int, reply_message_id: int | None
    ) -> int: ...

    @abstractmethod
    def inbound_log(self) -> list[InboundRecord]:
        """In arrival order."""

    @abstractmethod
    def close(self) -> None: ...
