"""Domain types: message lifecycle, profiles, marks, quiz content."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum, IntEnum

from campus_sms.errors import MalformedRecipient

MSISDN_RE = re.compile(r"^\+\d{8,15}$")

#: Quiz choices are labelled A..D in listed order.
CHOICE_LABELS = "ABCD"


class StatusFlag(IntEnum):
    """Per-message lifecycle flag.

    Codes 0 (New), 1 (Processing) and 3 (Sent) are the wire-visible
    values; 2 (Failed) fills the gap left between them so that failure
    reports have somewhere to land.
    """

    NEW = 0
    PROCESSING = 1
    FAILED = 2
    SENT = 3

    @property
    def label(self) -> str:
        return _STATUS_LABELS[self]


_STATUS_LABELS = {
    StatusFlag.NEW: "New",
    StatusFlag.PROCESSING: "Processing",
    StatusFlag.FAILED: "Failed",
    StatusFlag.SENT: "Sent",
}

#: The only legal lifecycle transitions. 0->1 claim, 1->3 delivered,
#: 1->2 failed, 2->0 retry requeue, 1->0 lease expiry.
LEGAL_EDGES = frozenset(
    {
        (StatusFlag.NEW, StatusFlag.PROCESSING),
        (StatusFlag.PROCESSING, StatusFlag.SENT),
        (StatusFlag.PROCESSING, StatusFlag.FAILED),
        (StatusFlag.FAILED, StatusFlag.NEW),
        (StatusFlag.PROCESSING, StatusFlag.NEW),
    }
)


def is_legal_edge(from_status: int, to_status: int) -> bool:
    try:
        return (StatusFlag(from_status), StatusFlag(to_status)) in LEGAL_EDGES
    except ValueError:
        return False


class AttemptOutcome(str, Enum):
    DELIVERED = "Delivered"
    LOST = "Lost"
    EXPIRED = "Expired"


#: Outcomes that count against a message's attempt budget. A lease
#: expiry is not an attempt by the worker's radio.
COUNTED_OUTCOMES = frozenset({AttemptOutcome.DELIVERED, AttemptOutcome.LOST})


def validate_msisdn(value: str) -> str:
    """Return the trimmed msisdn, or raise MalformedRecipient.

    The accepted form is a leading '+' followed by 8-15 digits.
    """
    candidate = (value or "").strip()
    if not MSISDN_RE.match(candidate):
        raise MalformedRecipient(f"not a valid msisdn: {value!r}")
    return candidate


@dataclass(frozen=True)
class Message:
    """One schedulable outbound SMS row (snapshot, never live storage)."""

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


@dataclass(frozen=True)
class AttemptRecord:
    message_id: int
    worker: str
    started_at: int
    finished_at: int
    outcome: AttemptOutcome


@dataclass(frozen=True)
class TransitionRecord:
    """One audited lifecycle edge, in commit order."""

    message_id: int
    from_status: StatusFlag
    to_status: StatusFlag
    worker: str | None
    at: int


@dataclass(frozen=True)
class RecipientProfile:
    msisdn: str
    name: str
    enrolment_no: str | None = None
    attributes: dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class GroupProfile:
    """Conjunctive attribute filter; an empty predicate matches everyone."""

    group_id: str
    predicate: tuple[tuple[str, str], ...] = ()

    def matches(self, profile: RecipientProfile) -> bool:
        return all(profile.attributes.get(attr) == value for attr, value in self.predicate)


@dataclass(frozen=True)
class MarksRecord:
    enrolment_no: str
    lines: tuple[tuple[str, int], ...]


@dataclass(frozen=True)
class QuizQuestion:
    course: str
    qid: int
    prompt: str
    choices: tuple[str, ...]
    correct: str
    feedback: str

    def __post_init__(self):
        if not 1 <= len(self.choices) <= len(CHOICE_LABELS):
            raise ValueError(f"question needs 1-{len(CHOICE_LABELS)} choices")
        if self.correct not in self.labels:
            raise ValueError(f"correct label {self.correct!r} not among {self.labels}")

    @property
    def labels(self) -> str:
        return CHOICE_LABELS[: len(self.choices)]


@dataclass(frozen=True)
class QuizCursor:
    """Per-(handset, course) quiz progress.

    next_qid is the lowest unanswered question id, or None once the
    course is finished.
    """

    msisdn: str
    course: str
    next_qid: int | None
    score: int
    answered: frozenset[int]


@dataclass(frozen=True)
class InboundRecord:
    id: int
    from_msisdn: str
    body: str
    received_at: int
    reply_message_id: int | None
