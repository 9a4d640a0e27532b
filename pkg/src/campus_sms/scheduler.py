"""Turns stored intent into deliverable work.

Campaign expansion is eager: one message row per resolved recipient, so
each row carries its own status flag. Claiming is a batch of 0->1
compare-and-sets; losers of a race are skipped silently. Failed messages
are requeued with a backoff until the retry budget runs out.
"""

from __future__ import annotations

from dataclasses import dataclass

from campus_sms.commands import render_template
from campus_sms.errors import EmptyGroup, NotClaimedByWorker
from campus_sms.models import AttemptOutcome, Message, StatusFlag
from campus_sms.storage.base import MessageStore


@dataclass(frozen=True)
class SchedulerConfig:
    """Run-level policy knobs, fixed for the lifetime of a run."""

    max_retries: int = 3
    backoff_ticks: int = 60
    lease_ticks: int = 300
    max_batch: int = 100


@dataclass(frozen=True)
class Campaign:
    campaign_id: str
    template: str
    group_id: str
    schedule_time: int
    created_by: str


class Scheduler:
    def __init__(self, store: MessageStore, config: SchedulerConfig | None = None):
        self.store = store
        self.config = config or SchedulerConfig()

    def compose_multicast(
        self, template: str, group_id: str, schedule_time: int, created_by: str
    ) -> tuple[Campaign, list[int]]:
        """Expand a template over a group into one message per member.

        All bodies are rendered before anything is persisted, so a bad
        placeholder leaves no partial campaign behind. Raises
        UnknownGroup, EmptyGroup or UnknownPlaceholder.
        """
        members = self.store.resolve_group(group_id)
        if not members:
            raise EmptyGroup(f"group {group_id} has no members")
        bodies = [(p.msisdn, render_template(template, p)) for p in members]
        campaign = Campaign(
            campaign_id=self._next_campaign_id(),
            template=template,
            group_id=group_id,
            schedule_time=int(schedule_time),
            created_by=created_by,
        )
        ids = self.store.insert_messages(
            [
                (msisdn, body, campaign.schedule_time, created_by, campaign.campaign_id)
                for msisdn, body in bodies
            ]
        )
        return campaign, ids

    def _next_campaign_id(self) -> str:
        existing = {
            m.campaign_id for m in self.store.list_messages() if m.campaign_id is not None
        }
        n = len(existing) + 1
        while f"c{n}" in existing:
            n += 1
        return f"c{n}"

    def claim_batch(self, now: int, worker_id: str, max_batch: int) -> list[Message]:
        """Claim up to max_batch due messages for a worker.

        Each returned message won its 0->1 compare-and-set under this
        worker; an empty list is the idle signal.
        """
        if max_batch < 1:
            raise ValueError("max_batch must be >= 1")
        if not worker_id:
            raise ValueError("worker_id must be non-empty")
        claimed = []
        for candidate in self.store.due_new(now, max_batch):
            won = self.store.transition(
                candidate.id, StatusFlag.NEW, StatusFlag.PROCESSING, worker=worker_id, at=now
            )
            if won:
                claimed.append(self.store.get_message(candidate.id))
        return claimed

    def report_outcome(
        self, worker_id: str, message_id: int, outcome: AttemptOutcome, now: int
    ) -> StatusFlag:
        """Apply a worker's delivery outcome.

        Delivered -> Sent. Lost -> Failed, then requeued with backoff while
        the retry budget lasts. Raises NotClaimedByWorker for stale reports
        (the claim moved on, e.g. after a lease expiry); these must not
        change state.
        """
        outcome = AttemptOutcome(outcome)
        if outcome not in (AttemptOutcome.DELIVERED, AttemptOutcome.LOST):
            raise ValueError("workers report only Delivered or Lost")
        before = self.store.get_message(message_id)  # raises UnknownMessage
        claimed_at = before.claimed_at if before.claimed_at is not None else now
        target = (
            StatusFlag.SENT if outcome == AttemptOutcome.DELIVERED else StatusFlag.FAILED
        )
        moved = self.store.transition(
            message_id, StatusFlag.PROCESSING, target, worker=worker_id, at=now
        )
        if not moved:
            raise NotClaimedByWorker(
                f"message {message_id} is not processing under {worker_id}"
            )
        self.store.record_attempt(message_id, worker_id, claimed_at, now, outcome)
        if outcome == AttemptOutcome.DELIVERED:
            return StatusFlag.SENT
        if self.store.get_message(message_id).attempts <= self.config.max_retries:
            self.store.requeue(message_id, now + self.config.backoff_ticks, at=now)
            return StatusFlag.NEW
        return StatusFlag.FAILED

    def sweep(self, now: int) -> int:
        """Reclaim expired leases; meant to run every scheduler tick."""
        return self.store.expire_leases(now, self.config.lease_ticks)
