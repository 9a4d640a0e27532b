"""Wires store, scheduler, command router, simulator and feed service
into one runnable system sharing a single clock."""

from __future__ import annotations

from dataclasses import dataclass

from campus_sms.clock import LogicalClock
from campus_sms.commands import CommandRouter
from campus_sms.fixtures import SeedCounts, seed_store
from campus_sms.gsm import GsmNetwork, SimConfig
from campus_sms.scheduler import Scheduler, SchedulerConfig
from campus_sms.service import FeedService
from campus_sms.storage import open_store


@dataclass(frozen=True)
class SystemConfig:
    store_path: str = "memory"
    seed: int = 1
    loss_prob: float = 0.0
    latency_min: int = 0
    latency_max: int = 0
    max_retries: int = 3
    backoff_ticks: int = 60
    lease_ticks: int = 300
    max_batch: int = 100

    def scheduler_config(self) -> SchedulerConfig:
        return SchedulerConfig(
            max_retries=self.max_retries,
            backoff_ticks=self.backoff_ticks,
            lease_ticks=self.lease_ticks,
            max_batch=self.max_batch,
        )

    def sim_config(self) -> SimConfig:
        return SimConfig(
            seed=self.seed,
            loss_prob=self.loss_prob,
            latency_min=self.latency_min,
            latency_max=self.latency_max,
        )


class System:
    def __init__(self, config: SystemConfig | None = None, clock=None):
        self.config = config or SystemConfig()
        self.clock = clock or LogicalClock()
        self.store = open_store(self.config.store_path)
        self.scheduler = Scheduler(self.store, self.config.scheduler_config())
        self.router = CommandRouter(self.store)
        self.sim = GsmNetwork(self.config.sim_config())
        self.service = FeedService(
            self.store,
            self.scheduler,
            self.router,
            self.clock,
            on_recipient_added=lambda profile: self.sim.register_handset(profile.msisdn),
        )
        # handsets originate pull requests through the simulated network
        self.sim.attach_inbound_handler(
            lambda sender, body, now: self.service.inbound(sender, body)
        )

    def seed_fixture(self, path: str) -> SeedCounts:
        counts = seed_store(self.store, path)
        self.register_all_handsets()
        return counts

    def register_all_handsets(self) -> None:
        for profile in self.store.list_recipients():
            self.sim.register_handset(profile.msisdn)

    def close(self) -> None:
        self.store.close()
