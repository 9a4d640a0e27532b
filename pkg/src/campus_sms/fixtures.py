"""Seed fixture files: recipients, groups, marks and quiz content.

The format is line-based; tokens follow shell quoting rules (shlex) so
values with spaces are double-quoted. Lines starting with '#' and blank
lines are ignored. Directives:

    recipient msisdn=+91... name=Asha [enrolment=EN001] [attr=value ...]
    cohort count=N base=+91... [name_prefix=Student] [enrolment_prefix=S]
           [start=1] [attr=value ...]
    group id=NAME [attr=value ...]
    marks enrolment=EN001 Subject=71 [Subject2=64 ...]
    quiz course=CS101 qid=1 prompt="..." a="..." b="..." [c= d=]
         correct=B feedback="..."

A cohort expands to ``count`` recipients with consecutive msisdns
(base+i), names ``{name_prefix}{start+i:04d}`` and enrolment numbers
``{enrolment_prefix}{start+i:04d}``. Seeding is an idempotent upsert by
natural key (msisdn / group id / enrolment / course+qid), so re-seeding
the same file changes nothing.
"""

from __future__ import annotations

import shlex
from dataclasses import dataclass, field
from pathlib import Path

from campus_sms.errors import ScenarioError
from campus_sms.models import (
    GroupProfile,
    MarksRecord,
    QuizQuestion,
    RecipientProfile,
)
from campus_sms.storage.base import MessageStore


@dataclass
class FixtureData:
    recipients: list[RecipientProfile] = field(default_factory=list)
    groups: list[GroupProfile] = field(default_factory=list)
    marks: list[MarksRecord] = field(default_factory=list)
    quiz_questions: list[QuizQuestion] = field(default_factory=list)


@dataclass(frozen=True)
class SeedCounts:
    recipients: int = 0
    groups: int = 0
    marks: int = 0
    quiz_questions: int = 0


def _pairs(tokens: list[str], line_no: int) -> list[tuple[str, str]]:
    pairs = []
    for token in tokens:
        if "=" not in token:
            raise ScenarioError(f"line {line_no}: expected key=value, got {token!r}")
        key, value = token.split("=", 1)
        pairs.append((key, value))
    return pairs


def _directive_recipient(pairs: list[tuple[str, str]], data: FixtureData, line_no: int):
    fields = dict(pairs)
    msisdn = fields.pop("msisdn", None)
    name = fields.pop("name", None)
    if not msisdn or not name:
        raise ScenarioError(f"line {line_no}: recipient needs msisdn and name")
    enrolment = fields.pop("enrolment", None)
    data.recipients.append(RecipientProfile(msisdn, name, enrolment, dict(fields)))


def _directive_cohort(pairs: list[tuple[str, str]], data: FixtureData, line_no: int):
    fields = dict(pairs)
    try:
        count = int(fields.pop("count"))
        base = fields.pop("base")
    except KeyError as exc:
        raise ScenarioError(f"line {line_no}: cohort needs count and base") from exc
    name_prefix = fields.pop("name_prefix", "Student")
    enrolment_prefix = fields.pop("enrolment_prefix", "S")
    start = int(fields.pop("start", "1"))
    if not base.startswith("+"):
        raise ScenarioError(f"line {line_no}: cohort base must be a +msisdn")
    base_number = int(base[1:])
    for i in range(count):
        serial = start + i
        data.recipients.append(
            RecipientProfile(
                msisdn=f"+{base_number + i}",
                name=f"{name_prefix}{serial:04d}",
                enrolment_no=f"{enrolment_prefix}{serial:04d}",
                attributes=dict(fields),
            )
        )


def _directive_group(pairs: list[tuple[str, str]], data: FixtureData, line_no: int):
    fields = list(pairs)
    ids = [v for k, v in fields if k == "id"]
    if len(ids) != 1:
        raise ScenarioError(f"line {line_no}: group needs exactly one id")
    predicate = tuple((k, v) for k, v in fields if k != "id")
    data.groups.append(GroupProfile(ids[0], predicate))


def _directive_marks(pairs: list[tuple[str, str]], data: FixtureData, line_no: int):
    enrolments = [v for k, v in pairs if k == "enrolment"]
    if len(enrolments) != 1:
        raise ScenarioError(f"line {line_no}: marks needs exactly one enrolment")
    lines = tuple((k, int(v)) for k, v in pairs if k != "enrolment")
    if not lines:
        raise ScenarioError(f"line {line_no}: marks needs at least one subject")
    data.marks.append(MarksRecord(enrolments[0], lines))


def _directive_quiz(pairs: list[tuple[str, str]], data: FixtureData, line_no: int):
    fields = dict(pairs)
    try:
        course = fields.pop("course")
        qid = int(fields.pop("qid"))
        prompt = fields.pop("prompt")
        correct = fields.pop("correct").upper()
        feedback = fields.pop("feedback")
    except KeyError as exc:
        raise ScenarioError(f"line {line_no}: quiz missing field {exc}") from exc
    choices = []
    for label in "abcd":
        if label in fields:
            choices.append(fields.pop(label))
        else:
            break
    if fields:
        raise ScenarioError(f"line {line_no}: unknown quiz fields {sorted(fields)}")
    try:
        question = QuizQuestion(course, qid, prompt, tuple(choices), correct, feedback)
    except ValueError as exc:
        raise ScenarioError(f"line {line_no}: {exc}") from exc
    data.quiz_questions.append(question)


_DIRECTIVES = {
    "recipient": _directive_recipient,
    "cohort": _directive_cohort,
    "group": _directive_group,
    "marks": _directive_marks,
    "quiz": _directive_quiz,
}


def parse_fixture(path: str | Path) -> FixtureData:
    data = FixtureData()
    text = Path(path).read_text(encoding="utf-8")
    for line_no, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        tokens = shlex.split(line)
        directive = tokens[0]
        handler = _DIRECTIVES.get(directive)
        if handler is None:
            raise ScenarioError(f"line {line_no}: unknown directive {directive!r}")
        handler(_pairs(tokens[1:], line_no), data, line_no)
    return data


def seed_store(store: MessageStore, path: str | Path) -> SeedCounts:
    """Load a fixture file into the store (idempotent upsert)."""
    data = parse_fixture(path)
    for profile in data.recipients:
        store.upsert_recipient(profile)
    for group in data.groups:
        store.upsert_group(group)
    for record in data.marks:
        store.upsert_marks(record)
    for question in data.quiz_questions:
        store.upsert_quiz_question(question)
    return SeedCounts(
        recipients=len(data.recipients),
        groups=len(data.groups),
        marks=len(data.marks),
        quiz_questions=len(data.quiz_questions),
    )
