"""Pull/interactive command handling and push-template rendering.

Every inbound body produces exactly one reply string; failures become
fixed reply texts, never exceptions, so the transport layer can treat
replies uniformly. The reply strings below are part of the external
contract and are exercised byte-for-byte by the acceptance suite.
"""

from __future__ import annotations

import re
import threading
from collections import defaultdict
from dataclasses import dataclass

from campus_sms.errors import EmptyBody, UnknownPlaceholder
from campus_sms.models import QuizCursor, QuizQuestion, RecipientProfile
from campus_sms.storage.base import MessageStore, next_qid_for

HELP_TEXT = "Unknown command. Try: result <enrolment no>, quiz <course>, ans <qid> <choice>"
NO_RECORD = "No record for enrolment {enrolment_no}"
NO_QUIZ = "No quiz for course {course}"
QUIZ_FINISHED = "Quiz complete. Score: {score}/{total}"
ALREADY_ANSWERED = "Question {qid} already answered."
BAD_CHOICE = "Invalid choice {choice}. Reply ans <qid> <A-D>."
NO_SUCH_QUESTION = "No question {qid} in quiz {course}"
NO_ACTIVE_QUIZ = "Send quiz <course> first."
NOT_REGISTERED = "Number not registered."
USAGE_RESULT = "Usage: result <enrolment no>"
USAGE_QUIZ = "Usage: quiz <course>"
USAGE_ANS = "Usage: ans <qid> <choice>"

_PLACEHOLDER_RE = re.compile(r"\{([^{}]*)\}")


@dataclass(frozen=True)
class Command:
    keyword: str
    args: tuple[str, ...]
    raw: str

    def format(self) -> str:
        return " ".join((self.keyword, *self.args))


def parse_command(body: str) -> Command:
    """Split on whitespace runs; the keyword is lowercased, arguments keep
    their original case. Raises EmptyBody for blank input."""
    if not (body or "").strip():
        raise EmptyBody("command body is empty")
    tokens = body.split()
    return Command(keyword=tokens[0].lower(), args=tuple(tokens[1:]), raw=body)


def render_template(template: str, profile: RecipientProfile) -> str:
    """Substitute {placeholder} tokens from the profile.

    Built-ins name, msisdn and enrolment_no resolve first, then the
    profile's attribute map. Raises UnknownPlaceholder for anything else;
    text without placeholders is returned unchanged.
    """
    built_ins = {
        "name": profile.name,
        "msisdn": profile.msisdn,
        "enrolment_no": profile.enrolment_no or "",
    }

    def substitute(match: re.Match) -> str:
        key = match.group(1)
        if key in built_ins:
            return built_ins[key]
        if key in profile.attributes:
            return profile.attributes[key]
        raise UnknownPlaceholder(key, profile.msisdn)

    return _PLACEHOLDER_RE.sub(substitute, template)


def format_marks(enrolment_no: str, lines) -> str:
    return "\n".join([enrolment_no, *[f"{subject}:{mark}" for subject, mark in lines]])


def format_question(question: QuizQuestion) -> str:
    choice_lines = [
        f"{label}) {text}" for label, text in zip(question.labels, question.choices)
    ]
    return "\n".join([f"Q{question.qid}. {question.prompt}", *choice_lines])


class CommandRouter:
    """Keyword dispatch for inbound SMS. The registry is static: result,
    quiz, ans, help; anything else answers with the help text."""

    def __init__(self, store: MessageStore):
        self._store = store
        # commands from the same handset serialize on its cursor;
        # different senders never contend
        self._sender_locks: dict[str, threading.Lock] = defaultdict(threading.Lock)
        self._locks_guard = threading.Lock()

    def _sender_lock(self, msisdn: str) -> threading.Lock:
        with self._locks_guard:
            return self._sender_locks[msisdn]

    def execute_body(self, body: str, sender_msisdn: str, now: int) -> str:
        try:
            command = parse_command(body)
        except EmptyBody:
            return HELP_TEXT
        return self.execute(command, sender_msisdn, now)

    def execute(self, command: Command, sender_msisdn: str, now: int) -> str:
        if self._store.find_recipient(sender_msisdn) is None:
            return NOT_REGISTERED
        if command.keyword == "result":
            return self._handle_result(command.args)
        if command.keyword == "quiz":
            with self._sender_lock(sender_msisdn):
                return self._handle_quiz(sender_msisdn, command.args)
        if command.keyword == "ans":
            with self._sender_lock(sender_msisdn):
                return self._handle_answer(sender_msisdn, command.args)
        return HELP_TEXT  # covers the explicit "help" keyword too

    def _handle_result(self, args: tuple[str, ...]) -> str:
        if len(args) != 1:
            return USAGE_RESULT
        enrolment_no = args[0]
        record = self._store.marks_for(enrolment_no)
        if record is None:
            return NO_RECORD.format(enrolment_no=enrolment_no)
        return format_marks(enrolment_no, record.lines)

    def _cursor(self, msisdn: str, course: str) -> QuizCursor:
        cursor = self._store.get_quiz_cursor(msisdn, course)
        if cursor is None:
            questions = self._store.quiz_questions(course)
            cursor = QuizCursor(
                msisdn=msisdn,
                course=course,
                next_qid=next_qid_for(questions, frozenset()),
                score=0,
                answered=frozenset(),
            )
        return cursor

    def _handle_quiz(self, msisdn: str, args: tuple[str, ...]) -> str:
        if len(args) != 1:
            return USAGE_QUIZ
        course = args[0]
        questions = self._store.quiz_questions(course)
        if not questions:
            return NO_QUIZ.format(course=course)
        cursor = self._cursor(msisdn, course)
        # asking for a quiz makes that course the handset's active session
        self._store.save_quiz_cursor(cursor, make_active=True)
        if cursor.next_qid is None:
            return QUIZ_FINISHED.format(score=cursor.score, total=len(questions))
        question = next(q for q in questions if q.qid == cursor.next_qid)
        return format_question(question)

    def _handle_answer(self, msisdn: str, args: tuple[str, ...]) -> str:
        if len(args) != 2:
            return USAGE_ANS
        qid_text, choice = args
        try:
            qid = int(qid_text)
        except ValueError:
            return USAGE_ANS
        course = self._store.active_quiz_course(msisdn)
        if course is None:
            return NO_ACTIVE_QUIZ
        questions = self._store.quiz_questions(course)
        question = next((q for q in questions if q.qid == qid), None)
        if question is None:
            return NO_SUCH_QUESTION.format(qid=qid, course=course)
        cursor = self._cursor(msisdn, course)
        if qid in cursor.answered:
            return ALREADY_ANSWERED.format(qid=qid)
        label = choice.upper()
        if label not in question.labels:
            return BAD_CHOICE.format(choice=choice)
        correct = label == question.correct
        answered = cursor.answered | {qid}
        self._store.save_quiz_cursor(
            QuizCursor(
                msisdn=msisdn,
                course=course,
                next_qid=next_qid_for(questions, answered),
                score=cursor.score + (1 if correct else 0),
                answered=answered,
            )
        )
        verdict = "Correct." if correct else f"Incorrect. Answer: {question.correct}."
        return f"{verdict}\n{question.feedback}"
