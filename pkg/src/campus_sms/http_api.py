"""HTTP surface over the feed service core.

Client protocol (XML): GET /api/outbox, POST /api/report,
POST /api/inbound. Admin API (JSON): /api/messages, /api/campaigns,
/api/groups, /api/recipients, /api/inbound-log. Admin identity arrives
in the X-Admin header and is stored as created_by; there is no
authentication beyond that.
"""

from __future__ import annotations

from pathlib import Path
from urllib.parse import parse_qs

from fastapi import FastAPI, HTTPException, Request, Response
from fastapi.staticfiles import StaticFiles

from campus_sms.errors import (
    EmptyBody,
    EmptyGroup,
    MalformedDocument,
    MalformedRecipient,
    UnknownGroup,
    UnknownMessage,
    UnknownPlaceholder,
)
from campus_sms.service import FeedService

XML = "application/xml"


def _admin(request: Request) -> str:
    return request.headers.get("X-Admin", "admin")


async def _json_body(request: Request) -> dict:
    try:
        payload = await request.json()
    except Exception:
        raise HTTPException(status_code=400, detail="body must be a JSON object")
    if not isinstance(payload, dict):
        raise HTTPException(status_code=400, detail="body must be a JSON object")
    return payload


def _require(payload: dict, *keys: str) -> list:
    missing = [k for k in keys if k not in payload]
    if missing:
        raise HTTPException(status_code=400, detail=f"missing fields: {', '.join(missing)}")
    return [payload[k] for k in keys]


def _int_field(payload: dict, key: str) -> int:
    try:
        return int(payload[key])
    except (KeyError, TypeError, ValueError):
        raise HTTPException(status_code=400, detail=f"field {key!r} must be an integer")


def create_app(service: FeedService, static_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="campus-sms feed service", docs_url=None, redoc_url=None)

    # -- client XML protocol -------------------------------------------

    @app.get("/api/outbox")
    def outbox(worker: str | None = None, max: int = 10):
        if not worker:
            raise HTTPException(status_code=400, detail="worker query parameter required")
        return Response(content=service.outbox_xml(worker, max), media_type=XML)

    @app.post("/api/report")
    async def report(request: Request):
        raw = (await request.body()).decode("utf-8", errors="replace")
        try:
            ack = service.report_xml(raw)
        except MalformedDocument as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return Response(content=ack, media_type=XML)

    @app.post("/api/inbound", status_code=204)
    async def inbound(request: Request):
        form = parse_qs((await request.body()).decode("utf-8", errors="replace"))
        sender = (form.get("from") or [""])[0]
        body = (form.get("body") or [""])[0]
        try:
            service.inbound(sender, body)
        except MalformedRecipient as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return Response(status_code=204)

    # -- admin JSON API --------------------------------------------------

    @app.post("/api/messages")
    async def submit_message(request: Request):
        payload = await _json_body(request)
        to, body = _require(payload, "to", "body")
        schedule_time = _int_field(payload, "schedule_time")
        try:
            return service.submit_message(to, body, schedule_time, _admin(request))
        except (MalformedRecipient, EmptyBody) as exc:
            raise HTTPException(status_code=400, detail=str(exc))

    @app.post("/api/campaigns")
    async def submit_campaign(request: Request):
        payload = await _json_body(request)
        template, group_id = _require(payload, "template", "group_id")
        schedule_time = _int_field(payload, "schedule_time")
        try:
            return service.submit_campaign(template, group_id, schedule_time, _admin(request))
        except UnknownGroup as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except (EmptyGroup, EmptyBody, UnknownPlaceholder) as exc:
            raise HTTPException(status_code=400, detail=str(exc))

    @app.get("/api/messages")
    def list_messages(status: int | None = None):
        if status is not None and status not in (0, 1, 2, 3):
            raise HTTPException(status_code=400, detail="status must be 0, 1, 2 or 3")
        return {"messages": service.list_messages(status)}

    @app.get("/api/messages/{message_id}")
    def message_detail(message_id: int):
        try:
            return service.message_detail(message_id)
        except UnknownMessage as exc:
            raise HTTPException(status_code=404, detail=str(exc))

    @app.get("/api/groups")
    def list_groups():
        return {"groups": service.list_groups()}

    @app.post("/api/groups")
    async def create_group(request: Request):
        payload = await _json_body(request)
        (group_id,) = _require(payload, "group_id")
        predicate = payload.get("predicate") or {}
        if not isinstance(predicate, dict):
            raise HTTPException(status_code=400, detail="predicate must be an object")
        try:
            return service.create_group(group_id, predicate)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))

    @app.get("/api/recipients")
    def list_recipients():
        return {"recipients": service.list_recipients()}

    @app.post("/api/recipients")
    async def create_recipient(request: Request):
        payload = await _json_body(request)
        msisdn, name = _require(payload, "msisdn", "name")
        attributes = payload.get("attributes") or {}
        if not isinstance(attributes, dict):
            raise HTTPException(status_code=400, detail="attributes must be an object")
        try:
            return service.create_recipient(
                msisdn, name, payload.get("enrolment_no"), attributes
            )
        except MalformedRecipient as exc:
            raise HTTPException(status_code=400, detail=str(exc))

    @app.get("/api/inbound-log")
    def inbound_log():
        return {"entries": service.inbound_entries()}

    if static_dir and Path(static_dir).is_dir():
        app.mount("/admin", StaticFiles(directory=static_dir, html=True), name="admin")

    return app
