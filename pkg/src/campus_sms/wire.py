"""The client-facing XML wire format, fixed bit-exactly.

Three documents travel between feed service and delivery clients, all
UTF-8 with no XML declaration:

    <batch worker="W" ts="T"><sms id="I" to="N">BODY</sms>...</batch>
    <batch worker="W" ts="T"/>                      (empty batch)
    <report worker="W"><sms id="I" status="S"/>...</report>
    <ack><sms id="I" result="R"/>...</ack>

Report status codes may only be 2 (failure) or 3 (success); ack results
are ok | requeued | dead | ignored | unknown. Serialization is by hand
so the byte layout stays stable; parsing uses ElementTree. Bodies must
not contain carriage returns or control characters other than newline
(XML cannot round-trip them); attribute values must not contain any
whitespace other than plain spaces.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

from campus_sms.errors import MalformedDocument

ACK_RESULTS = ("ok", "requeued", "dead", "ignored", "unknown")


@dataclass(frozen=True)
class BatchItem:
    id: int
    to: str
    body: str


@dataclass(frozen=True)
class BatchEnvelope:
    worker: str
    ts: int
    items: tuple[BatchItem, ...] = ()


@dataclass(frozen=True)
class ReportItem:
    id: int
    status: int  # 2 = Lost/failure, 3 = Delivered/success


@dataclass(frozen=True)
class StatusReport:
    worker: str
    items: tuple[ReportItem, ...] = ()


@dataclass(frozen=True)
class AckItem:
    id: int
    result: str


@dataclass(frozen=True)
class AckDocument:
    items: tuple[AckItem, ...] = ()


def _attr(value: str) -> str:
    return escape(str(value), {'"': "&quot;"})


def serialize_batch(envelope: BatchEnvelope) -> str:
    ids = [item.id for item in envelope.items]
    if len(ids) != len(set(ids)):
        raise ValueError("batch items must have unique ids")
    head = f'<batch worker="{_attr(envelope.worker)}" ts="{int(envelope.ts)}"'
    if not envelope.items:
        return head + "/>"
    parts = [head + ">"]
    for item in envelope.items:
        parts.append(
            f'<sms id="{int(item.id)}" to="{_attr(item.to)}">{escape(item.body)}</sms>'
        )
    parts.append("</batch>")
    return "".join(parts)


def serialize_report(report: StatusReport) -> str:
    head = f'<report worker="{_attr(report.worker)}"'
    if not report.items:
        return head + "/>"
    parts = [head + ">"]
    for item in report.items:
        if item.status not in (2, 3):
            raise ValueError(f"report status must be 2 or 3, got {item.status}")
        parts.append(f'<sms id="{int(item.id)}" status="{int(item.status)}"/>')
    parts.append("</report>")
    return "".join(parts)


def serialize_ack(ack: AckDocument) -> str:
    if not ack.items:
        return "<ack/>"
    parts = ["<ack>"]
    for item in ack.items:
        if item.result not in ACK_RESULTS:
            raise ValueError(f"unknown ack result {item.result!r}")
        parts.append(f'<sms id="{int(item.id)}" result="{item.result}"/>')
    parts.append("</ack>")
    return "".join(parts)


def _root(xml_text: str, expected_tag: str) -> ET.Element:
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as exc:
        raise MalformedDocument(f"bad XML: {exc}") from exc
    if root.tag != expected_tag:
        raise MalformedDocument(f"expected <{expected_tag}>, got <{root.tag}>")
    return root


def _required(element: ET.Element, name: str) -> str:
    value = element.get(name)
    if value is None:
        raise MalformedDocument(f"<{element.tag}> missing attribute {name!r}")
    return value


def _int_attr(element: ET.Element, name: str) -> int:
    raw = _required(element, name)
    try:
        return int(raw)
    except ValueError as exc:
        raise MalformedDocument(f"attribute {name}={raw!r} is not an integer") from exc


def parse_batch(xml_text: str) -> BatchEnvelope:
    root = _root(xml_text, "batch")
    items = []
    for child in root:
        if child.tag != "sms":
            raise MalformedDocument(f"unexpected element <{child.tag}> in batch")
        items.append(
            BatchItem(id=_int_attr(child, "id"), to=_required(child, "to"), body=child.text or "")
        )
    ids = [item.id for item in items]
    if len(ids) != len(set(ids)):
        raise MalformedDocument("duplicate sms ids in batch")
    return BatchEnvelope(
        worker=_required(root, "worker"), ts=_int_attr(root, "ts"), items=tuple(items)
    )


def parse_report(xml_text: str) -> StatusReport:
    root = _root(xml_text, "report")
    items = []
    for child in root:
        if child.tag != "sms":
            raise MalformedDocument(f"unexpected element <{child.tag}> in report")
        status = _int_attr(child, "status")
        if status not in (2, 3):
            raise MalformedDocument(f"report status must be 2 or 3, got {status}")
        items.append(ReportItem(id=_int_attr(child, "id"), status=status))
    return StatusReport(worker=_required(root, "worker"), items=tuple(items))


def parse_ack(xml_text: str) -> AckDocument:
    root = _root(xml_text, "ack")
    items = []
    for child in root:
        if child.tag != "sms":
            raise MalformedDocument(f"unexpected element <{child.tag}> in ack")
        result = _required(child, "result")
        if result not in ACK_RESULTS:
            raise MalformedDocument(f"unknown ack result {result!r}")
        items.append(AckItem(id=_int_attr(child, "id"), result=result))
    return AckDocument(items=tuple(items))
