"""Deterministic end-to-end scenario runner.

A scenario file drives an in-process system (feed service, workers,
simulated network) under the logical clock, so a run is replayable: the
same file and seed produce byte-identical traces.

Format (shlex tokens, '#' comments). Preamble first, then steps:

    scenario NAME
    config seed=42 loss=0.05 latency=0..3 store=memory max_retries=3
           backoff=60 lease=300 max_batch=100
    seed_fixture RELATIVE/PATH

    at TICK action key=value ...

Actions: submit to= body= schedule= | campaign template= group= schedule=
| inject_inbound from= body= | start_worker id= [interval=5] [batch=10]
| kill_worker id= [mode=immediate|after_fetch] | advance_clock
| assert_inbox msisdn= [count=] [contains=] [equals=]
| assert_status status= [count=] [min=] [campaign=]

Step ticks must be non-decreasing. Each tick runs the lease sweep first,
then every live worker whose poll interval has come around (in start
order), then the step's own action. Quoted values may use \\n and \\t
escapes (for multi-line bodies in assertions).
"""

from __future__ import annotations

import shlex
from dataclasses import dataclass, field
from pathlib import Path

from campus_sms.client import LocalTransport, Worker, WorkerConfig
from campus_sms.errors import ScenarioError
from campus_sms.models import StatusFlag
from campus_sms.system import System, SystemConfig

ACTIONS = {
    "submit",
    "campaign",
    "inject_inbound",
    "start_worker",
    "kill_worker",
    "advance_clock",
    "assert_inbox",
    "assert_status",
}


@dataclass(frozen=True)
class Step:
    at_tick: int
    action: str
    params: dict[str, str]
    line_no: int


@dataclass
class Scenario:
    name: str
    config: SystemConfig
    fixtures: list[str]
    steps: list[Step]
    base_dir: Path


@dataclass
class ScenarioResult:
    name: str
    passed: bool
    trace_lines: list[str] = field(default_factory=list)
    failure: str | None = None

    def trace_text(self) -> str:
        return "".join(line + "\n" for line in self.trace_lines)


def _decode_escapes(value: str) -> str:
    return value.encode("utf-8").decode("unicode_escape")


def _kv(tokens: list[str], line_no: int, decode: bool = False) -> dict[str, str]:
    params = {}
    for token in tokens:
        if "=" not in token:
            raise ScenarioError(f"line {line_no}: expected key=value, got {token!r}")
        key, value = token.split("=", 1)
        params[key] = _decode_escapes(value) if decode else value
    return params


def _build_config(params: dict[str, str], line_no: int) -> SystemConfig:
    kwargs: dict = {}
    mapping = {
        "store": ("store_path", str),
        "seed": ("seed", int),
        "loss": ("loss_prob", float),
        "max_retries": ("max_retries", int),
        "backoff": ("backoff_ticks", int),
        "lease": ("lease_ticks", int),
        "max_batch": ("max_batch", int),
    }
    for key, value in params.items():
        if key == "latency":
            try:
                lo, hi = value.split("..", 1)
                kwargs["latency_min"], kwargs["latency_max"] = int(lo), int(hi)
            except ValueError as exc:
                raise ScenarioError(f"line {line_no}: latency must be LO..HI") from exc
            continue
        if key not in mapping:
            raise ScenarioError(f"line {line_no}: unknown config key {key!r}")
        name, cast = mapping[key]
        try:
            kwargs[name] = cast(value)
        except ValueError as exc:
            raise ScenarioError(f"line {line_no}: bad value for {key}: {value!r}") from exc
    return SystemConfig(**kwargs)


def parse_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    name = path.stem
    config = SystemConfig()
    fixtures: list[str] = []
    steps: list[Step] = []
    last_tick = 0
    for line_no, raw_line in enumerate(
        path.read_text(encoding="utf-8").splitlines(), start=1
    ):
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        tokens = shlex.split(line)
        head = tokens[0]
        if head == "scenario":
            if len(tokens) != 2:
                raise ScenarioError(f"line {line_no}: scenario takes one name")
            name = tokens[1]
        elif head == "config":
            if steps:
                raise ScenarioError(f"line {line_no}: config must precede steps")
            config = _build_config(_kv(tokens[1:], line_no), line_no)
        elif head == "seed_fixture":
            if len(tokens) != 2:
                raise ScenarioError(f"line {line_no}: seed_fixture takes one path")
            fixtures.append(tokens[1])
        elif head == "at":
            if len(tokens) < 3:
                raise ScenarioError(f"line {line_no}: at TICK ACTION ...")
            try:
                tick = int(tokens[1])
            except ValueError as exc:
                raise ScenarioError(f"line {line_no}: bad tick {tokens[1]!r}") from exc
            if tick < last_tick:
                raise ScenarioError(
                    f"line {line_no}: tick {tick} goes backwards (previous {last_tick})"
                )
            last_tick = tick
            action = tokens[2]
            if action not in ACTIONS:
                raise ScenarioError(f"line {line_no}: unknown action {action!r}")
            steps.append(Step(tick, action, _kv(tokens[3:], line_no, decode=True), line_no))
        else:
            raise ScenarioError(f"line {line_no}: unknown directive {head!r}")
    return Scenario(
        name=name, config=config, fixtures=fixtures, steps=steps, base_dir=path.parent
    )


class _SimWorker:
    """A worker as the runner drives it: polled at tick boundaries, and
    killable either immediately or right after its next fetch (modelling
    a crash between fetch and radio send)."""

    def __init__(self, worker: Worker, start_tick: int, interval: int):
        self.worker = worker
        self.start_tick = start_tick
        self.interval = interval
        self.alive = True
        self.crash_after_fetch = False

    def due(self, tick: int) -> bool:
        return (
            self.alive
            and tick > self.start_tick
            and (tick - self.start_tick) % self.interval == 0
        )


class Runner:
    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.system = System(scenario.config)
        self.workers: list[_SimWorker] = []
        self.trace: list[str] = []
        for fixture in scenario.fixtures:
            counts = self.system.seed_fixture(scenario.base_dir / fixture)
            self.trace.append(
                f"0\tseed\t{fixture}\trecipients={counts.recipients}"
                f" groups={counts.groups} marks={counts.marks}"
                f" quiz={counts.quiz_questions}"
            )

    def run(self) -> ScenarioResult:
        try:
            for step in self.scenario.steps:
                self._advance_to(step.at_tick)
                self._apply(step)
        except ScenarioError as exc:
            self.trace.append(f"{self.system.clock.now}\tFAIL\t{exc}")
            return ScenarioResult(
                self.scenario.name, passed=False, trace_lines=self.trace, failure=str(exc)
            )
        self.trace.append(f"{self.system.clock.now}\tPASS")
        return ScenarioResult(self.scenario.name, passed=True, trace_lines=self.trace)

    # -- time ----------------------------------------------------------

    def _advance_to(self, target: int) -> None:
        now = self.system.clock.now
        while now < target:
            now += 1
            self._process_tick(now)

    def _process_tick(self, tick: int) -> None:
        self.system.clock.advance_to(tick)
        reclaimed = self.system.scheduler.sweep(tick)
        if reclaimed:
            self.trace.append(f"{tick}\tsweep\treclaimed={reclaimed}")
        for sim_worker in self.workers:
            if not sim_worker.due(tick):
                continue
            if sim_worker.crash_after_fetch:
                envelope = sim_worker.worker.transport.fetch(
                    sim_worker.worker.config.worker_id, sim_worker.worker.config.max_batch
                )
                sim_worker.alive = False
                self.trace.append(
                    f"{tick}\tcrash\t{sim_worker.worker.config.worker_id}"
                    f"\tfetched={len(envelope.items)}"
                )
                continue
            result = sim_worker.worker.poll_once(tick)
            if result.fetched:
                self.trace.append(
                    f"{tick}\tpoll\t{sim_worker.worker.config.worker_id}"
                    f"\tfetched={result.fetched} delivered={result.delivered}"
                    f" failed={result.failed}"
                )

    # -- actions ---------------------------------------------------------

    def _apply(self, step: Step) -> None:
        handler = getattr(self, f"_do_{step.action}")
        try:
            handler(step)
        except ScenarioError:
            raise
        except Exception as exc:
            raise ScenarioError(f"line {step.line_no}: {step.action} failed: {exc}") from exc

    def _required(self, step: Step, *keys: str) -> list[str]:
        missing = [k for k in keys if k not in step.params]
        if missing:
            raise ScenarioError(
                f"line {step.line_no}: {step.action} missing {', '.join(missing)}"
            )
        return [step.params[k] for k in keys]

    def _do_submit(self, step: Step) -> None:
        to, body, schedule = self._required(step, "to", "body", "schedule")
        created = self.system.service.submit_message(to, body, int(schedule), "scenario")
        self.trace.append(f"{step.at_tick}\tsubmit\tid={created['id']} to={to}")

    def _do_campaign(self, step: Step) -> None:
        template, group, schedule = self._required(step, "template", "group", "schedule")
        created = self.system.service.submit_campaign(
            template, group, int(schedule), "scenario"
        )
        self.trace.append(
            f"{step.at_tick}\tcampaign\t{created['campaign_id']}\tcount={created['count']}"
        )

    def _do_inject_inbound(self, step: Step) -> None:
        sender, body = self._required(step, "from", "body")
        self.system.sim.inject_inbound(sender, body, step.at_tick)
        self.trace.append(f"{step.at_tick}\tinject\tfrom={sender} body={body!r}")

    def _do_start_worker(self, step: Step) -> None:
        (worker_id,) = self._required(step, "id")
        if any(w.worker.config.worker_id == worker_id and w.alive for w in self.workers):
            raise ScenarioError(f"line {step.line_no}: worker {worker_id} already running")
        interval = int(step.params.get("interval", "5"))
        batch = int(step.params.get("batch", "10"))
        if interval < 1:
            raise ScenarioError(f"line {step.line_no}: interval must be >= 1")
        worker = Worker(
            WorkerConfig(worker_id=worker_id, poll_interval=interval, max_batch=batch),
            LocalTransport(self.system.service),
            self.system.sim,
            clock=self.system.clock,
        )
        self.workers.append(_SimWorker(worker, step.at_tick, interval))
        self.trace.append(
            f"{step.at_tick}\tstart_worker\t{worker_id}\tinterval={interval} batch={batch}"
        )

    def _do_kill_worker(self, step: Step) -> None:
        (worker_id,) = self._required(step, "id")
        mode = step.params.get("mode", "immediate")
        if mode not in ("immediate", "after_fetch"):
            raise ScenarioError(f"line {step.line_no}: unknown kill mode {mode!r}")
        target = next(
            (w for w in self.workers if w.worker.config.worker_id == worker_id and w.alive),
            None,
        )
        if target is None:
            raise ScenarioError(f"line {step.line_no}: no running worker {worker_id}")
        if mode == "immediate":
            target.alive = False
        else:
            target.crash_after_fetch = True
        self.trace.append(f"{step.at_tick}\tkill_worker\t{worker_id}\tmode={mode}")

    def _do_advance_clock(self, step: Step) -> None:
        self.trace.append(f"{step.at_tick}\tadvance_clock")

    def _do_assert_inbox(self, step: Step) -> None:
        (msisdn,) = self._required(step, "msisdn")
        inbox = self.system.sim.handset_inbox(msisdn)
        texts = [entry.text for entry in inbox.messages]
        if "count" in step.params and len(texts) != int(step.params["count"]):
            raise ScenarioError(
                f"line {step.line_no}: inbox {msisdn} has {len(texts)} messages,"
                f" expected {step.params['count']}"
            )
        if "contains" in step.params:
            needle = step.params["contains"]
            if not any(needle in t for t in texts):
                raise ScenarioError(
                    f"line {step.line_no}: inbox {msisdn} has no message containing {needle!r}"
                )
        if "equals" in step.params:
            wanted = step.params["equals"]
            if wanted not in texts:
                raise ScenarioError(
                    f"line {step.line_no}: inbox {msisdn} has no message equal to {wanted!r}"
                )
        self.trace.append(f"{step.at_tick}\tassert_inbox\t{msisdn}\tok count={len(texts)}")

    def _do_assert_status(self, step: Step) -> None:
        (status_text,) = self._required(step, "status")
        status = StatusFlag(int(status_text))
        messages = self.system.store.list_messages(
            status=status, campaign_id=step.params.get("campaign")
        )
        actual = len(messages)
        if "count" in step.params and actual != int(step.params["count"]):
            raise ScenarioError(
                f"line {step.line_no}: {actual} messages with status {int(status)},"
                f" expected {step.params['count']}"
            )
        if "min" in step.params and actual < int(step.params["min"]):
            raise ScenarioError(
                f"line {step.line_no}: {actual} messages with status {int(status)},"
                f" expected at least {step.params['min']}"
            )
        self.trace.append(
            f"{step.at_tick}\tassert_status\tstatus={int(status)}\tok actual={actual}"
        )

    def close(self) -> None:
        self.system.close()


def run_scenario(path: str | Path) -> tuple[ScenarioResult, Runner]:
    """Parse and run; the caller owns (and closes) the returned runner."""
    runner = Runner(parse_scenario(path))
    return runner.run(), runner
