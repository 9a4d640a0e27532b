"""Embedded sqlite backend.

One connection, serialized by a process-wide lock; every multi-statement
operation runs inside an explicit transaction. The schema is documented
in the README (tables: messages, attempts, transitions, recipients,
groups, marks, quiz_questions, quiz_cursors, inbound_log).
"""

from __future__ import annotations

import json
import sqlite3
import threading
from contextlib import contextmanager
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

_SCHEMA = """
CREATE TABLE IF NOT EXISTS messages (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    recipient TEXT NOT NULL,
    body TEXT NOT NULL,
    schedule_time INTEGER NOT NULL,
    status INTEGER NOT NULL DEFAULT 0,
    claimed_by TEXT,
    claimed_at INTEGER,
    attempts INTEGER NOT NULL DEFAULT 0,
    created_by TEXT NOT NULL,
    campaign_id TEXT
);
CREATE INDEX IF NOT EXISTS idx_messages_due ON messages (status, schedule_time, id);
CREATE INDEX IF NOT EXISTS idx_messages_campaign ON messages (campaign_id);

CREATE TABLE IF NOT EXISTS attempts (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    message_id INTEGER NOT NULL,
    worker TEXT NOT NULL,
    started_at INTEGER NOT NULL,
    finished_at INTEGER NOT NULL,
    outcome TEXT NOT NULL
);
CREATE INDEX IF NOT EXISTS idx_attempts_message ON attempts (message_id);

CREATE TABLE IF NOT EXISTS transitions (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    message_id INTEGER NOT NULL,
    from_status INTEGER NOT NULL,
    to_status INTEGER NOT NULL,
    worker TEXT,
    at INTEGER NOT NULL
);

CREATE TABLE IF NOT EXISTS recipients (
    msisdn TEXT PRIMARY KEY,
    name TEXT NOT NULL,
    enrolment_no TEXT UNIQUE,
    attributes TEXT NOT NULL DEFAULT '{}'
);

CREATE TABLE IF NOT EXISTS groups (
    group_id TEXT PRIMARY KEY,
    predicate TEXT NOT NULL DEFAULT '[]'
);

CREATE TABLE IF NOT EXISTS marks (
    enrolment_no TEXT NOT NULL,
    pos INTEGER NOT NULL,
    subject TEXT NOT NULL,
    mark INTEGER NOT NULL,
    PRIMARY KEY (enrolment_no, pos)
);

CREATE TABLE IF NOT EXISTS quiz_questions (
    course TEXT NOT NULL,
    qid INTEGER NOT NULL,
    prompt TEXT NOT NULL,
    choices TEXT NOT NULL,
    correct TEXT NOT NULL,
    feedback TEXT NOT NULL,
    PRIMARY KEY (course, qid)
);

CREATE TABLE IF NOT EXISTS quiz_cursors (
    msisdn TEXT NOT NULL,
    course TEXT NOT NULL,
    score INTEGER NOT NULL DEFAULT 0,
    answered TEXT NOT NULL DEFAULT '[]',
    active INTEGER NOT NULL DEFAULT 0,
    PRIMARY KEY (msisdn, course)
);

CREATE TABLE IF NOT EXISTS inbound_log (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    from_msisdn TEXT NOT NULL,
    body TEXT NOT NULL,
    received_at INTEGER NOT NULL,
    reply_message_id INTEGER
);
"""


def _message_from_row(row: sqlite3.Row) -> Message:
    return Message(
        id=row["id"],
        recipient=row["recipient"],
        body=row["body"],
        schedule_time=row["schedule_time"],
        status=StatusFlag(row["status"]),
        claimed_by=row["claimed_by"],
        claimed_at=row["claimed_at"],
        attempts=row["attempts"],
        created_by=row["created_by"],
        campaign_id=row["campaign_id"],
    )


class SqliteStore(MessageStore):
    def __init__(self, path: str):
        self._path = path
        self._lock = threading.RLock()
        self._conn = sqlite3.connect(path, check_same_thread=False)
        self._conn.row_factory = sqlite3.Row
        self._conn.isolation_level = None  # manual transaction control
        with self._lock:
            self._conn.execute("PRAGMA journal_mode=WAL")
            self._conn.execute("PRAGMA synchronous=NORMAL")
            self._conn.executescript(_SCHEMA)

    @contextmanager
    def _tx(self):
        with self._lock:
            self._conn.execute("BEGIN IMMEDIATE")
            try:
                yield self._conn
            except BaseException:
                self._conn.execute("ROLLBACK")
                raise
            self._conn.execute("COMMIT")

    # -- messages ----------------------------------------------------

    def insert_message(self, recipient, body, schedule_time, created_by, campaign_id=None):
        msisdn = check_new_message(recipient, body)
        with self._tx() as conn:
            cur = conn.execute(
                "INSERT INTO messages (recipient, body, schedule_time, status, attempts,"
                " created_by, campaign_id) VALUES (?, ?, ?, 0, 0, ?, ?)",
                (msisdn, body, int(schedule_time), created_by, campaign_id),
            )
            return cur.lastrowid

    def insert_messages(self, rows: Sequence[tuple[str, str, int, str, str | None]]):
        checked = [
            (check_new_message(r, b), b, int(t), who, cid) for r, b, t, who, cid in rows
        ]
        with self._tx() as conn:
            ids = []
            for msisdn, body, schedule_time, created_by, campaign_id in checked:
                cur = conn.execute(
                    "INSERT INTO messages (recipient, body, schedule_time, status, attempts,"
                    " created_by, campaign_id) VALUES (?, ?, ?, 0, 0, ?, ?)",
                    (msisdn, body, schedule_time, created_by, campaign_id),
                )
                ids.append(cur.lastrowid)
            return ids

    def get_message(self, message_id):
        with self._lock:
            row = self._conn.execute(
                "SELECT * FROM messages WHERE id = ?", (message_id,)
            ).fetchone()
        if row is None:
            raise UnknownMessage(f"no message {message_id}")
        return _message_from_row(row)

    def list_messages(self, status=None, campaign_id=None):
        query = "SELECT * FROM messages"
        clauses, params = [], []
        if status is not None:
            clauses.append("status = ?")
            params.append(int(status))
        if campaign_id is not None:
            clauses.append("campaign_id = ?")
            params.append(campaign_id)
        if clauses:
            query += " WHERE " + " AND ".join(clauses)
        query += " ORDER BY id"
        with self._lock:
            rows = self._conn.execute(query, params).fetchall()
        return [_message_from_row(r) for r in rows]

    def transition(self, message_id, from_status, to_status, worker=None, at=0):
        from_status = StatusFlag(from_status)
        to_status = StatusFlag(to_status)
        check_edge(from_status, to_status)
        if from_status == StatusFlag.NEW and to_status == StatusFlag.PROCESSING and not worker:
            raise ValueError("claiming 0->1 requires a worker id")
        with self._tx() as conn:
            exists = conn.execute(
                "SELECT 1 FROM messages WHERE id = ?", (message_id,)
            ).fetchone()
            if exists is None:
                raise UnknownMessage(f"no message {message_id}")
            if to_status == StatusFlag.PROCESSING:
                cur = conn.execute(
                    "UPDATE messages SET status = ?, claimed_by = ?, claimed_at = ?"
                    " WHERE id = ? AND status = ?",
                    (int(to_status), worker, int(at), message_id, int(from_status)),
                )
            elif from_status == StatusFlag.PROCESSING:
                predicate = "id = ? AND status = ?"
                params = [message_id, int(from_status)]
                if worker is not None:
                    predicate += " AND claimed_by = ?"
                    params.append(worker)
                cur = conn.execute(
                    "UPDATE messages SET status = ?, claimed_by = NULL, claimed_at = NULL"
                    f" WHERE {predicate}",
                    (int(to_status), *params),
                )
            else:
                cur = conn.execute(
                    "UPDATE messages SET status = ? WHERE id = ? AND status = ?",
                    (int(to_status), message_id, int(from_status)),
                )
            if cur.rowcount != 1:
                return False
            conn.execute(
                "INSERT INTO transitions (message_id, from_status, to_status, worker, at)"
                " VALUES (?, ?, ?, ?, ?)",
                (message_id, int(from_status), int(to_status), worker, int(at)),
            )
            return True

    def requeue(self, message_id, new_schedule_time, at=0):
        with self._tx() as conn:
            if conn.execute("SELECT 1 FROM messages WHERE id = ?", (message_id,)).fetchone() is None:
                raise UnknownMessage(f"no message {message_id}")
            cur = conn.execute(
                "UPDATE messages SET status = 0, schedule_time = ? WHERE id = ? AND status = 2",
                (int(new_schedule_time), message_id),
            )
            if cur.rowcount != 1:
                return False
            conn.execute(
                "INSERT INTO transitions (message_id, from_status, to_status, worker, at)"
                " VALUES (?, 2, 0, NULL, ?)",
                (message_id, int(at)),
            )
            return True

    def due_new(self, now, limit):
        if limit < 1:
            raise ValueError("limit must be >= 1")
        with self._lock:
            rows = self._conn.execute(
                "SELECT * FROM messages WHERE status = 0 AND schedule_time <= ?"
                " ORDER BY schedule_time, id LIMIT ?",
                (int(now), int(limit)),
            ).fetchall()
        return [_message_from_row(r) for r in rows]

    def expire_leases(self, now, lease_duration):
        if lease_duration <= 0:
            raise ValueError("lease_duration must be > 0")
        with self._tx() as conn:
            stale = conn.execute(
                "SELECT id, claimed_by, claimed_at FROM messages"
                " WHERE status = 1 AND claimed_at + ? <= ? ORDER BY id",
                (int(lease_duration), int(now)),
            ).fetchall()
            for row in stale:
                conn.execute(
                    "UPDATE messages SET status = 0, claimed_by = NULL, claimed_at = NULL"
                    " WHERE id = ?",
                    (row["id"],),
                )
                conn.execute(
                    "INSERT INTO transitions (message_id, from_status, to_status, worker, at)"
                    " VALUES (?, 1, 0, ?, ?)",
                    (row["id"], row["claimed_by"], int(now)),
                )
                conn.execute(
                    "INSERT INTO attempts (message_id, worker, started_at, finished_at, outcome)"
                    " VALUES (?, ?, ?, ?, ?)",
                    (
                        row["id"],
                        row["claimed_by"] or "",
                        row["claimed_at"],
                        int(now),
                        AttemptOutcome.EXPIRED.value,
                    ),
                )
            return len(stale)

    def record_attempt(self, message_id, worker, started_at, finished_at, outcome):
        outcome = AttemptOutcome(outcome)
        if finished_at < started_at:
            raise ValueError("finished_at must be >= started_at")
        with self._tx() as conn:
            if conn.execute("SELECT 1 FROM messages WHERE id = ?", (message_id,)).fetchone() is None:
                raise UnknownMessage(f"no message {message_id}")
            conn.execute(
                "INSERT INTO attempts (message_id, worker, started_at, finished_at, outcome)"
                " VALUES (?, ?, ?, ?, ?)",
                (message_id, worker, int(started_at), int(finished_at), outcome.value),
            )
            if outcome in COUNTED_OUTCOMES:
                conn.execute(
                    "UPDATE messages SET attempts = attempts + 1 WHERE id = ?", (message_id,)
                )

    def attempts_for(self, message_id):
        with self._lock:
            rows = self._conn.execute(
                "SELECT * FROM attempts WHERE message_id = ? ORDER BY id", (message_id,)
            ).fetchall()
        return [
            AttemptRecord(
                r["message_id"],
                r["worker"],
                r["started_at"],
                r["finished_at"],
                AttemptOutcome(r["outcome"]),
            )
            for r in rows
        ]

    def transition_log(self):
        with self._lock:
            rows = self._conn.execute("SELECT * FROM transitions ORDER BY id").fetchall()
        return [
            TransitionRecord(
                r["message_id"],
                StatusFlag(r["from_status"]),
                StatusFlag(r["to_status"]),
                r["worker"],
                r["at"],
            )
            for r in rows
        ]

    def status_counts(self):
        with self._lock:
            rows = self._conn.execute(
                "SELECT status, COUNT(*) AS n FROM messages GROUP BY status"
            ).fetchall()
        counts = {flag: 0 for flag in StatusFlag}
        for r in rows:
            counts[StatusFlag(r["status"])] = r["n"]
        return counts

    # -- recipients and groups ---------------------------------------

    def upsert_recipient(self, profile):
        with self._tx() as conn:
            conn.execute(
                "INSERT INTO recipients (msisdn, name, enrolment_no, attributes)"
                " VALUES (?, ?, ?, ?)"
                " ON CONFLICT(msisdn) DO UPDATE SET name = excluded.name,"
                " enrolment_no = excluded.enrolment_no, attributes = excluded.attributes",
                (
                    profile.msisdn,
                    profile.name,
                    profile.enrolment_no,
                    json.dumps(profile.attributes),
                ),
            )

    def get_recipient(self, msisdn):
        profile = self.find_recipient(msisdn)
        if profile is None:
            raise UnknownRecipient(f"no recipient {msisdn}")
        return profile

    def find_recipient(self, msisdn):
        with self._lock:
            row = self._conn.execute(
                "SELECT * FROM recipients WHERE msisdn = ?", (msisdn,)
            ).fetchone()
        return self._profile_from_row(row) if row else None

    def recipient_by_enrolment(self, enrolment_no):
        with self._lock:
            row = self._conn.execute(
                "SELECT * FROM recipients WHERE enrolment_no = ?", (enrolment_no,)
            ).fetchone()
        return self._profile_from_row(row) if row else None

    @staticmethod
    def _profile_from_row(row: sqlite3.Row) -> RecipientProfile:
        return RecipientProfile(
            msisdn=row["msisdn"],
            name=row["name"],
            enrolment_no=row["enrolment_no"],
            attributes=json.loads(row["attributes"]),
        )

    def list_recipients(self):
        with self._lock:
            rows = self._conn.execute("SELECT * FROM recipients ORDER BY msisdn").fetchall()
        return [self._profile_from_row(r) for r in rows]

    def upsert_group(self, group):
        with self._tx() as conn:
            conn.execute(
                "INSERT INTO groups (group_id, predicate) VALUES (?, ?)"
                " ON CONFLICT(group_id) DO UPDATE SET predicate = excluded.predicate",
                (group.group_id, json.dumps([list(p) for p in group.predicate])),
            )

    def get_group(self, group_id):
        with self._lock:
            row = self._conn.execute(
                "SELECT * FROM groups WHERE group_id = ?", (group_id,)
            ).fetchone()
        if row is None:
            raise UnknownGroup(f"no group {group_id}")
        predicate = tuple((a, v) for a, v in json.loads(row["predicate"]))
        return GroupProfile(group_id=row["group_id"], predicate=predicate)

    def list_groups(self):
        with self._lock:
            rows = self._conn.execute("SELECT group_id FROM groups ORDER BY group_id").fetchall()
        return [self.get_group(r["group_id"]) for r in rows]

    def resolve_group(self, group_id):
        group = self.get_group(group_id)
        return [p for p in self.list_recipients() if group.matches(p)]

    # -- marks and quiz ----------------------------------------------

    def upsert_marks(self, record):
        if self.recipient_by_enrolment(record.enrolment_no) is None:
            raise UnknownRecipient(f"no recipient with enrolment {record.enrolment_no}")
        with self._tx() as conn:
            conn.execute("DELETE FROM marks WHERE enrolment_no = ?", (record.enrolment_no,))
            for pos, (subject, mark) in enumerate(record.lines):
                conn.execute(
                    "INSERT INTO marks (enrolment_no, pos, subject, mark) VALUES (?, ?, ?, ?)",
                    (record.enrolment_no, pos, subject, int(mark)),
                )

    def marks_for(self, enrolment_no):
        with self._lock:
            rows = self._conn.execute(
                "SELECT subject, mark FROM marks WHERE enrolment_no = ? ORDER BY pos",
                (enrolment_no,),
            ).fetchall()
        if not rows:
            return None
        return MarksRecord(
            enrolment_no=enrolment_no, lines=tuple((r["subject"], r["mark"]) for r in rows)
        )

    def upsert_quiz_question(self, question):
        with self._tx() as conn:
            conn.execute(
                "INSERT INTO quiz_questions (course, qid, prompt, choices, correct, feedback)"
                " VALUES (?, ?, ?, ?, ?, ?)"
                " ON CONFLICT(course, qid) DO UPDATE SET prompt = excluded.prompt,"
                " choices = excluded.choices, correct = excluded.correct,"
                " feedback = excluded.feedback",
                (
                    question.course,
                    question.qid,
                    question.prompt,
                    json.dumps(list(question.choices)),
                    question.correct,
                    question.feedback,
                ),
            )

    def quiz_questions(self, course):
        with self._lock:
            rows = self._conn.execute(
                "SELECT * FROM quiz_questions WHERE course = ? ORDER BY qid", (course,)
            ).fetchall()
        return [
            QuizQuestion(
                course=r["course"],
                qid=r["qid"],
                prompt=r["prompt"],
                choices=tuple(json.loads(r["choices"])),
                correct=r["correct"],
                feedback=r["feedback"],
            )
            for r in rows
        ]

    def quiz_courses(self):
        with self._lock:
            rows = self._conn.execute(
                "SELECT DISTINCT course FROM quiz_questions ORDER BY course"
            ).fetchall()
        return [r["course"] for r in rows]

    def get_quiz_cursor(self, msisdn, course):
        with self._lock:
            row = self._conn.execute(
                "SELECT * FROM quiz_cursors WHERE msisdn = ? AND course = ?",
                (msisdn, course),
            ).fetchone()
            if row is None:
                return None
            answered = frozenset(json.loads(row["answered"]))
            return QuizCursor(
                msisdn=msisdn,
                course=course,
                next_qid=next_qid_for(self.quiz_questions(course), answered),
                score=row["score"],
                answered=answered,
            )

    def save_quiz_cursor(self, cursor, make_active=False):
        with self._tx() as conn:
            conn.execute(
                "INSERT INTO quiz_cursors (msisdn, course, score, answered, active)"
                " VALUES (?, ?, ?, ?, 0)"
                " ON CONFLICT(msisdn, course) DO UPDATE SET score = excluded.score,"
                " answered = excluded.answered",
                (
                    cursor.msisdn,
                    cursor.course,
                    cursor.score,
                    json.dumps(sorted(cursor.answered)),
                ),
            )
            if make_active:
                conn.execute(
                    "UPDATE quiz_cursors SET active = 0 WHERE msisdn = ?", (cursor.msisdn,)
                )
                conn.execute(
                    "UPDATE quiz_cursors SET active = 1 WHERE msisdn = ? AND course = ?",
                    (cursor.msisdn, cursor.course),
                )

    def active_quiz_course(self, msisdn):
        with self._lock:
            row = self._conn.execute(
                "SELECT course FROM quiz_cursors WHERE msisdn = ? AND active = 1", (msisdn,)
            ).fetchone()
        return row["course"] if row else None

    # -- inbound log --------------------------------------------------

    def log_inbound(self, from_msisdn, body, received_at, reply_message_id):
        with self._tx() as conn:
            cur = conn.execute(
                "INSERT INTO inbound_log (from_msisdn, body, received_at, reply_message_id)"
                " VALUES (?, ?, ?, ?)",
                (from_msisdn, body, int(received_at), reply_message_id),
            )
            return cur.lastrowid

    def inbound_log(self):
        with self._lock:
            rows = self._conn.execute("SELECT * FROM inbound_log ORDER BY id").fetchall()
        return [
            InboundRecord(
                r["id"], r["from_msisdn"], r["body"], r["received_at"], r["reply_message_id"]
            )
            for r in rows
        ]

    def close(self):
        with self._lock:
            self._conn.close()
