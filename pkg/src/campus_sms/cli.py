"""Operator command line.

Subcommands: serve, client, seed, submit, campaign, inject, scenario,
status, report. The store path comes from --store, the CAMPUS_SMS_STORE
environment variable, or a config file (INI, section [campus-sms]) whose
keys mirror the long flag names.
"""

from __future__ import annotations

import argparse
import configparser
import json
import os
import sqlite3
import sys
import threading
import time
from pathlib import Path

import httpx

from campus_sms.client import HttpTransport, Worker, WorkerConfig
from campus_sms.clock import WallClock
from campus_sms.errors import CampusSmsError, TransportError
from campus_sms.fixtures import seed_store
from campus_sms.gsm import GsmNetwork, SimConfig
from campus_sms.http_api import create_app
from campus_sms.models import StatusFlag
from campus_sms.report import render_report
from campus_sms.scenario import run_scenario
from campus_sms.storage import open_store
from campus_sms.system import System, SystemConfig

ENV_STORE = "CAMPUS_SMS_STORE"
DEFAULT_ENDPOINT = "http://127.0.0.1:8350"
CONFIG_SECTION = "campus-sms"


def load_config(path: str | None) -> dict[str, str]:
    if not path:
        return {}
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise CampusSmsError(f"config file not found: {path}")
    if not parser.has_section(CONFIG_SECTION):
        return {}
    return dict(parser.items(CONFIG_SECTION))


def resolve_store(args, config: dict[str, str]) -> str:
    return args.store or os.environ.get(ENV_STORE) or config.get("store") or "campus_sms.db"


def resolve(args_value, config: dict[str, str], key: str, default, cast=str):
    if args_value is not None:
        return args_value
    if key in config:
        return cast(config[key])
    return default


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="campus-sms",
        description="Campus SMS scheduling and delivery system",
    )
    parser.add_argument("--config", help="INI config file with a [campus-sms] section")
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the feed service")
    serve.add_argument("--listen", help="host:port (default 127.0.0.1:8350)")
    serve.add_argument("--store", help="store path, 'memory', or ':memory:'")
    serve.add_argument("--seed-fixture", help="fixture file to load at startup")
    serve.add_argument("--static-dir", help="serve an admin UI from this directory at /admin")

    client = sub.add_parser("client", help="run a delivery worker")
    client.add_argument("--worker-id", required=True)
    client.add_argument("--endpoint", help=f"feed service URL (default {DEFAULT_ENDPOINT})")
    client.add_argument("--poll-interval", type=int, help="seconds between polls (default 5)")
    client.add_argument("--max-batch", type=int, help="messages per fetch (default 10)")
    client.add_argument("--seed", type=int, help="radio RNG seed (default 1)")
    client.add_argument("--loss-prob", type=float, help="radio segment loss (default 0)")
    client.add_argument("--once", action="store_true", help="run a single poll and exit")

    seed = sub.add_parser("seed", help="load a fixture file into the store")
    seed.add_argument("fixture")
    seed.add_argument("--store")

    submit = sub.add_parser("submit", help="schedule a single message via the admin API")
    submit.add_argument("--to", required=True)
    submit.add_argument("--body", required=True)
    submit.add_argument("--schedule", type=int, required=True)
    submit.add_argument("--endpoint")

    campaign = sub.add_parser("campaign", help="schedule a personalized group campaign")
    campaign.add_argument("--template", required=True)
    campaign.add_argument("--group", required=True)
    campaign.add_argument("--schedule", type=int, required=True)
    campaign.add_argument("--endpoint")

    inject = sub.add_parser("inject", help="play a handset: send an inbound SMS")
    inject.add_argument("--from", dest="sender", required=True)
    inject.add_argument("--body", required=True)
    inject.add_argument("--endpoint")

    scenario = sub.add_parser("scenario", help="run a scenario file deterministically")
    scenario.add_argument("path")
    scenario.add_argument("--out", help="directory for step and radio traces")
    scenario.add_argument("--quiet", action="store_true")

    status = sub.add_parser("status", help="show queue status from the store")
    status.add_argument("--store")
    status.add_argument("--limit", type=int, default=10)

    report = sub.add_parser("report", help="summarize a radio trace and render figures")
    report.add_argument("trace")
    report.add_argument("--out", required=True)

    return parser


def cmd_serve(args, config) -> int:
    listen = resolve(args.listen, config, "listen", "127.0.0.1:8350")
    host, _, port_text = listen.partition(":")
    try:
        port = int(port_text or "8350")
    except ValueError:
        print(f"error: bad listen address {listen!r}", file=sys.stderr)
        return 2
    store_path = resolve_store(args, config)
    try:
        system = System(SystemConfig(store_path=store_path), clock=WallClock())
    except sqlite3.Error as exc:
        print(f"error: cannot open store {store_path!r}: {exc}", file=sys.stderr)
        return 1
    if args.seed_fixture:
        counts = system.seed_fixture(args.seed_fixture)
        print(f"seeded {counts.recipients} recipients from {args.seed_fixture}")

    def sweep_loop():
        while True:
            time.sleep(1)
            try:
                system.scheduler.sweep(system.clock.now)
            except Exception:
                pass

    threading.Thread(target=sweep_loop, daemon=True).start()
    app = create_app(system.service, static_dir=args.static_dir)
    print(f"feed service listening on {host}:{port} (store: {store_path})")
    import uvicorn

    try:
        uvicorn.run(app, host=host or "127.0.0.1", port=port, log_level="warning")
    except SystemExit as exc:
        return int(exc.code or 1)
    except OSError as exc:
        print(f"error: cannot bind {host}:{port}: {exc}", file=sys.stderr)
        return 1
    finally:
        system.close()
    return 0


def cmd_client(args, config) -> int:
    endpoint = resolve(args.endpoint, config, "endpoint", DEFAULT_ENDPOINT)
    worker_config = WorkerConfig(
        worker_id=args.worker_id,
        endpoint=endpoint,
        poll_interval=resolve(args.poll_interval, config, "poll_interval", 5, int),
        max_batch=resolve(args.max_batch, config, "max_batch", 10, int),
    )
    radio = GsmNetwork(
        SimConfig(
            seed=resolve(args.seed, config, "seed", 1, int),
            loss_prob=resolve(args.loss_prob, config, "loss_prob", 0.0, float),
        ),
        auto_register=True,
    )
    worker = Worker(worker_config, HttpTransport(endpoint), radio, clock=WallClock())
    try:
        if args.once:
            result = worker.poll_once(worker.clock.now)
            print(f"fetched={result.fetched} delivered={result.delivered} failed={result.failed}")
            return 0
        summary = worker.run_loop()
        print(
            f"polls={summary.polls} fetched={summary.fetched}"
            f" delivered={summary.delivered} failed={summary.failed}"
        )
        return 0
    except TransportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        worker.request_exit()
        return 0


def cmd_seed(args, config) -> int:
    store = open_store(resolve_store(args, config))
    try:
        counts = seed_store(store, args.fixture)
    finally:
        store.close()
    print(
        f"recipients={counts.recipients} groups={counts.groups}"
        f" marks={counts.marks} quiz_questions={counts.quiz_questions}"
    )
    return 0


def _post_json(endpoint: str, path: str, payload: dict) -> int:
    try:
        response = httpx.post(f"{endpoint.rstrip('/')}{path}", json=payload, timeout=10.0)
    except httpx.HTTPError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if response.status_code >= 400:
        print(f"error {response.status_code}: {response.text}", file=sys.stderr)
        return 1
    print(json.dumps(response.json()))
    return 0


def cmd_submit(args, config) -> int:
    endpoint = resolve(args.endpoint, config, "endpoint", DEFAULT_ENDPOINT)
    return _post_json(
        endpoint,
        "/api/messages",
        {"to": args.to, "body": args.body, "schedule_time": args.schedule},
    )


def cmd_campaign(args, config) -> int:
    endpoint = resolve(args.endpoint, config, "endpoint", DEFAULT_ENDPOINT)
    return _post_json(
        endpoint,
        "/api/campaigns",
        {"template": args.template, "group_id": args.group, "schedule_time": args.schedule},
    )


def cmd_inject(args, config) -> int:
    endpoint = resolve(args.endpoint, config, "endpoint", DEFAULT_ENDPOINT)
    try:
        response = httpx.post(
            f"{endpoint.rstrip('/')}/api/inbound",
            data={"from": args.sender, "body": args.body},
            timeout=10.0,
        )
    except httpx.HTTPError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if response.status_code >= 400:
        print(f"error {response.status_code}: {response.text}", file=sys.stderr)
        return 1
    print("injected")
    return 0


def cmd_scenario(args, config) -> int:
    result, runner = run_scenario(args.path)
    try:
        if not args.quiet:
            for line in result.trace_lines:
                print(line)
        if args.out:
            outdir = Path(args.out)
            outdir.mkdir(parents=True, exist_ok=True)
            (outdir / "step_trace.txt").write_text(result.trace_text(), encoding="utf-8")
            runner.system.sim.write_trace(str(outdir / "gsm_trace.tsv"))
            if not args.quiet:
                print(f"traces written to {outdir}")
        print(f"scenario {result.name}: {'PASS' if result.passed else 'FAIL'}")
        return 0 if result.passed else 1
    finally:
        runner.close()


def cmd_status(args, config) -> int:
    store = open_store(resolve_store(args, config))
    try:
        counts = store.status_counts()
        for flag in StatusFlag:
            print(f"{int(flag)} {flag.label:10s} {counts[flag]}")
        recent = store.list_messages()[-args.limit :]
        for message in recent:
            preview = message.body[:40].replace("\n", " ")
            print(
                f"#{message.id} -> {message.recipient} [{message.status.label}]"
                f" t={message.schedule_time} attempts={message.attempts} {preview!r}"
            )
    finally:
        store.close()
    return 0


def cmd_report(args, config) -> int:
    headline = render_report(args.trace, args.out)
    for key, value in headline.items():
        print(f"{key}: {value}")
    return 0


_COMMANDS = {
    "serve": cmd_serve,
    "client": cmd_client,
    "seed": cmd_seed,
    "submit": cmd_submit,
    "campaign": cmd_campaign,
    "inject": cmd_inject,
    "scenario": cmd_scenario,
    "status": cmd_status,
    "report": cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        return _COMMANDS[args.command](args, config)
    except CampusSmsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
