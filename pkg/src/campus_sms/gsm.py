"""Deterministic simulated GSM network and virtual handsets.

Randomness comes from a 64-bit linear congruential generator so a run
can be replayed from its seed, in any language:

    state(0) = seed mod 2^64
    state(n+1) = (6364136965279866443 * state(n) + 1442695040888963407) mod 2^64
    unit(n) = (state(n) >> 11) / 2^53            # float in [0, 1)

Per send: one unit draw per segment, in order; a segment is lost when
its draw is < loss_prob. Only if every segment survives is one further
draw consumed for the latency: latency_min + floor(u * (latency_max -
latency_min + 1)). Sends to unregistered numbers consume no draws.

Each segment event appends one line to the trace, tab-separated:
ts, to, ref, part (as index/total), outcome (ok | lost).
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from typing import Callable

from campus_sms.errors import EmptyBody, TooLong, TransportError, UnknownHandset

LCG_MULTIPLIER = 6364136965279866443
LCG_INCREMENT = 1442695040888963407
_MASK64 = (1 << 64) - 1

SINGLE_PART_LIMIT = 160
MULTI_PART_LIMIT = 153
MAX_PARTS = 10


class Lcg64:
    """The documented generator; see the module docstring for constants."""

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next_u64(self) -> int:
        self.state = (LCG_MULTIPLIER * self.state + LCG_INCREMENT) & _MASK64
        return self.state

    def next_unit(self) -> float:
        return (self.next_u64() >> 11) / float(1 << 53)

    def next_int(self, lo: int, hi: int) -> int:
        if hi < lo:
            raise ValueError("empty range")
        return lo + int(self.next_unit() * (hi - lo + 1))


def segment(text: str) -> list[str]:
    """Split a message body into transmission payloads.

    Up to 160 characters travel as a single part; longer texts become
    ceil(len/153) parts of at most 153 characters each, at most 10 parts.
    """
    if not text:
        raise EmptyBody("cannot send an empty text")
    if len(text) > MULTI_PART_LIMIT * MAX_PARTS:
        raise TooLong(f"text of {len(text)} chars exceeds {MULTI_PART_LIMIT * MAX_PARTS}")
    if len(text) <= SINGLE_PART_LIMIT:
        return [text]
    return [text[i : i + MULTI_PART_LIMIT] for i in range(0, len(text), MULTI_PART_LIMIT)]


def reassemble(parts: list[str]) -> str:
    return "".join(parts)


def part_count(text: str) -> int:
    if len(text) <= SINGLE_PART_LIMIT:
        return 1
    return math.ceil(len(text) / MULTI_PART_LIMIT)


@dataclass(frozen=True)
class SimConfig:
    seed: int = 1
    loss_prob: float = 0.0
    latency_min: int = 0
    latency_max: int = 0

    def __post_init__(self):
        if not 0.0 <= self.loss_prob <= 1.0:
            raise ValueError("loss_prob must be within [0, 1]")
        if self.latency_min > self.latency_max:
            raise ValueError("latency_min must be <= latency_max")


@dataclass(frozen=True)
class SendOutcome:
    delivered: bool
    delivered_at: int | None = None
    reason: str | None = None


@dataclass(frozen=True)
class InboxEntry:
    received_at: int
    text: str
    origin_message_id: int


@dataclass(frozen=True)
class HandsetInbox:
    msisdn: str
    messages: tuple[InboxEntry, ...]


class GsmNetwork:
    """Single logical network; concurrent sends serialize at its boundary
    so the seeded draw stream is consumed in a recorded arrival order.

    Handsets must be registered before they can receive or originate
    SMS; with auto_register=True (live demo workers) any destination is
    registered on first use instead of being dropped.
    """

    def __init__(
        self,
        config: SimConfig | None = None,
        inbound_handler: Callable[[str, str, int], None] | None = None,
        auto_register: bool = False,
    ):
        self.config = config or SimConfig()
        self._rng = Lcg64(self.config.seed)
        self._lock = threading.RLock()
        self._inboxes: dict[str, list[InboxEntry]] = {}
        self._seen_origins: dict[str, set[int]] = {}
        self._trace: list[str] = []
        self._next_ref = 1
        self._inbound_handler = inbound_handler
        self._auto_register = auto_register

    def attach_inbound_handler(self, handler: Callable[[str, str, int], None]) -> None:
        self._inbound_handler = handler

    def register_handset(self, msisdn: str) -> None:
        with self._lock:
            self._inboxes.setdefault(msisdn, [])
            self._seen_origins.setdefault(msisdn, set())

    def is_registered(self, msisdn: str) -> bool:
        with self._lock:
            return msisdn in self._inboxes

    def registered_handsets(self) -> list[str]:
        with self._lock:
            return sorted(self._inboxes)

    def send_message(
        self, to: str, text: str, now: int, origin_message_id: int
    ) -> SendOutcome:
        with self._lock:
            parts = segment(text)
            ref = self._next_ref
            self._next_ref += 1
            total = len(parts)
            if to not in self._inboxes:
                if not self._auto_register:
                    for index in range(1, total + 1):
                        self._trace_event(now, to, ref, index, total, "lost")
                    return SendOutcome(delivered=False, reason="unregistered")
                self.register_handset(to)
            # one independent draw per segment, all consumed even after a loss
            survived = []
            for index in range(1, total + 1):
                lost = self._rng.next_unit() < self.config.loss_prob
                survived.append(not lost)
                self._trace_event(now, to, ref, index, total, "lost" if lost else "ok")
            if not all(survived):
                return SendOutcome(delivered=False, reason="segment_loss")
            latency = self._rng.next_int(self.config.latency_min, self.config.latency_max)
            delivered_at = now + latency
            if origin_message_id not in self._seen_origins[to]:
                self._seen_origins[to].add(origin_message_id)
                self._inboxes[to].append(
                    InboxEntry(
                        received_at=delivered_at,
                        text=reassemble(parts),
                        origin_message_id=origin_message_id,
                    )
                )
            return SendOutcome(delivered=True, delivered_at=delivered_at)

    def inject_inbound(self, from_msisdn: str, body: str, now: int) -> None:
        """Play the student role: forward a handset-originated SMS to the
        feed service's inbound endpoint."""
        with self._lock:
            if from_msisdn not in self._inboxes:
                raise UnknownHandset(f"no handset {from_msisdn}")
            handler = self._inbound_handler
        if handler is None:
            raise TransportError("no inbound service attached to the network")
        handler(from_msisdn, body, now)

    def handset_inbox(self, msisdn: str) -> HandsetInbox:
        with self._lock:
            if msisdn not in self._inboxes:
                raise UnknownHandset(f"no handset {msisdn}")
            entries = sorted(
                self._inboxes[msisdn],
                key=lambda e: (e.received_at, e.origin_message_id),
            )
            return HandsetInbox(msisdn=msisdn, messages=tuple(entries))

    def _trace_event(
        self, ts: int, to: str, ref: int, index: int, total: int, outcome: str
    ) -> None:
        self._trace.append(f"{ts}\t{to}\t{ref}\t{index}/{total}\t{outcome}")

    def trace_lines(self) -> list[str]:
        with self._lock:
            return list(self._trace)

    def trace_text(self) -> str:
        return "".join(line + "\n" for line in self.trace_lines())

    def write_trace(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.trace_text())
