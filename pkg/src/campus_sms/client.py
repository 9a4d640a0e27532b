"""Polling delivery worker.

A worker is stateless across polls: it fetches one claimed batch from
the feed service, pushes each message through its radio (the simulated
GSM network), and posts one status report for the whole batch. Anything
it was holding when it died simply waits for the lease sweep.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field

import httpx

from campus_sms.errors import EmptyBody, TooLong, TransportError
from campus_sms.gsm import GsmNetwork
from campus_sms.service import FeedService
from campus_sms.wire import (
    AckDocument,
    BatchEnvelope,
    ReportItem,
    StatusReport,
    parse_ack,
    parse_batch,
    serialize_report,
)


class LocalTransport:
    """In-process transport that still exercises the XML wire format."""

    def __init__(self, service: FeedService):
        self._service = service

    def fetch(self, worker_id: str, max_items: int) -> BatchEnvelope:
        return parse_batch(self._service.outbox_xml(worker_id, max_items))

    def report(self, report: StatusReport) -> AckDocument:
        return parse_ack(self._service.report_xml(serialize_report(report)))


class HttpTransport:
    def __init__(self, endpoint: str, client: httpx.Client | None = None):
        self._endpoint = endpoint.rstrip("/")
        self._client = client or httpx.Client(timeout=10.0)

    def fetch(self, worker_id: str, max_items: int) -> BatchEnvelope:
        try:
            response = self._client.get(
                f"{self._endpoint}/api/outbox",
                params={"worker": worker_id, "max": max_items},
            )
            response.raise_for_status()
        except httpx.HTTPError as exc:
            raise TransportError(f"outbox fetch failed: {exc}") from exc
        return parse_batch(response.text)

    def report(self, report: StatusReport) -> AckDocument:
        try:
            response = self._client.post(
                f"{self._endpoint}/api/report",
                content=serialize_report(report).encode("utf-8"),
                headers={"Content-Type": "application/xml"},
            )
            response.raise_for_status()
        except httpx.HTTPError as exc:
            raise TransportError(f"status report failed: {exc}") from exc
        return parse_ack(response.text)


@dataclass
class WorkerConfig:
    worker_id: str
    endpoint: str = ""
    poll_interval: int = 5
    max_batch: int = 10
    max_consecutive_failures: int = 5


@dataclass(frozen=True)
class PollResult:
    fetched: int
    delivered: int
    failed: int


@dataclass
class RunSummary:
    polls: int = 0
    fetched: int = 0
    delivered: int = 0
    failed: int = 0
    transport_errors: int = 0

    def add(self, result: PollResult) -> None:
        self.polls += 1
        self.fetched += result.fetched
        self.delivered += result.delivered
        self.failed += result.failed


class Worker:
    def __init__(self, config: WorkerConfig, transport, radio: GsmNetwork, clock=None):
        self.config = config
        self.transport = transport
        self.radio = radio
        self.clock = clock
        self._exit = threading.Event()

    def request_exit(self) -> None:
        self._exit.set()

    @property
    def exiting(self) -> bool:
        return self._exit.is_set()

    def poll_once(self, now: int) -> PollResult:
        """One fetch-deliver-report cycle. An empty batch posts no report."""
        envelope = self.transport.fetch(self.config.worker_id, self.config.max_batch)
        if not envelope.items:
            return PollResult(0, 0, 0)
        items = []
        delivered = failed = 0
        for item in envelope.items:
            try:
                outcome = self.radio.send_message(item.to, item.body, now, item.id)
                ok = outcome.delivered
            except (TooLong, EmptyBody):
                # the radio cannot carry it; report it lost rather than crash
                ok = False
            if ok:
                delivered += 1
            else:
                failed += 1
            items.append(ReportItem(id=item.id, status=3 if ok else 2))
        self.transport.report(
            StatusReport(worker=self.config.worker_id, items=tuple(items))
        )
        return PollResult(len(envelope.items), delivered, failed)

    def run_loop(self, sleep_fn=time.sleep, max_polls: int | None = None) -> RunSummary:
        """Poll every poll_interval ticks until asked to exit.

        Gives up by re-raising TransportError after
        max_consecutive_failures unreachable polls in a row.
        """
        summary = RunSummary()
        consecutive_failures = 0
        while not self._exit.is_set():
            now = self.clock.now if self.clock is not None else int(time.time())
            try:
                summary.add(self.poll_once(now))
                consecutive_failures = 0
            except TransportError:
                consecutive_failures += 1
                summary.transport_errors += 1
                if consecutive_failures >= self.config.max_consecutive_failures:
                    raise
            if max_polls is not None and summary.polls + summary.transport_errors >= max_polls:
                break
            if self._exit.wait(0) or self._exit.is_set():
                break
            sleep_fn(self.config.poll_interval)
        return summary
