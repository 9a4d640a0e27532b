"""Offline reporting over simulator trace logs.

Reads the tab-separated segment trace (ts, to, ref, part as index/total,
outcome) and writes a delimited summary plus matplotlib figures next to
it: per-tick send volume, cumulative delivered segments, and the
distribution of parts per message.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt


@dataclass(frozen=True)
class SegmentEvent:
    ts: int
    to: str
    ref: int
    part_index: int
    part_total: int
    outcome: str


def read_trace(path: str | Path) -> list[SegmentEvent]:
    events = []
    for line_no, line in enumerate(
        Path(path).read_text(encoding="utf-8").splitlines(), start=1
    ):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 5:
            raise ValueError(f"trace line {line_no}: expected 5 tab-separated fields")
        ts, to, ref, part, outcome = fields
        index, total = part.split("/", 1)
        events.append(
            SegmentEvent(
                ts=int(ts),
                to=to,
                ref=int(ref),
                part_index=int(index),
                part_total=int(total),
                outcome=outcome,
            )
        )
    return events


@dataclass(frozen=True)
class TraceSummary:
    segments: int
    delivered_segments: int
    lost_segments: int
    messages: int
    delivered_messages: int
    first_tick: int | None
    last_tick: int | None

    @property
    def segment_loss_rate(self) -> float:
        return self.lost_segments / self.segments if self.segments else 0.0


def summarize(events: list[SegmentEvent]) -> TraceSummary:
    by_ref: dict[int, list[SegmentEvent]] = {}
    for event in events:
        by_ref.setdefault(event.ref, []).append(event)
    delivered_messages = sum(
        1 for segs in by_ref.values() if all(s.outcome == "ok" for s in segs)
    )
    ticks = [e.ts for e in events]
    return TraceSummary(
        segments=len(events),
        delivered_segments=sum(1 for e in events if e.outcome == "ok"),
        lost_segments=sum(1 for e in events if e.outcome != "ok"),
        messages=len(by_ref),
        delivered_messages=delivered_messages,
        first_tick=min(ticks) if ticks else None,
        last_tick=max(ticks) if ticks else None,
    )


def write_summary(events: list[SegmentEvent], path: str | Path) -> None:
    """Per-tick delimited rollup: tick, segments, ok, lost."""
    per_tick: dict[int, Counter] = {}
    for event in events:
        per_tick.setdefault(event.ts, Counter())[event.outcome] += 1
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("tick\tsegments\tok\tlost\n")
        for tick in sorted(per_tick):
            counts = per_tick[tick]
            total = sum(counts.values())
            fh.write(f"{tick}\t{total}\t{counts.get('ok', 0)}\t{counts.get('lost', 0)}\n")


def render_figures(events: list[SegmentEvent], outdir: str | Path) -> list[Path]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = []

    per_tick_ok: Counter = Counter()
    per_tick_lost: Counter = Counter()
    for event in events:
        if event.outcome == "ok":
            per_tick_ok[event.ts] += 1
        else:
            per_tick_lost[event.ts] += 1
    ticks = sorted(set(per_tick_ok) | set(per_tick_lost))

    fig, ax = plt.subplots(figsize=(8, 4))
    ax.bar(ticks, [per_tick_ok.get(t, 0) for t in ticks], label="ok", color="#2a7")
    ax.bar(
        ticks,
        [per_tick_lost.get(t, 0) for t in ticks],
        bottom=[per_tick_ok.get(t, 0) for t in ticks],
        label="lost",
        color="#c33",
    )
    ax.set_xlabel("tick")
    ax.set_ylabel("segments sent")
    ax.set_title("Send volume per tick")
    ax.legend()
    fig.tight_layout()
    path = outdir / "send_volume.png"
    fig.savefig(path)
    plt.close(fig)
    paths.append(path)

    fig, ax = plt.subplots(figsize=(8, 4))
    cumulative, count = [], 0
    for tick in ticks:
        count += per_tick_ok.get(tick, 0)
        cumulative.append(count)
    ax.step(ticks, cumulative, where="post", color="#247")
    ax.set_xlabel("tick")
    ax.set_ylabel("segments delivered (cumulative)")
    ax.set_title("Delivery progress")
    fig.tight_layout()
    path = outdir / "delivery_progress.png"
    fig.savefig(path)
    plt.close(fig)
    paths.append(path)

    totals = {}
    for event in events:
        totals[event.ref] = event.part_total
    sizes = Counter(totals.values())
    fig, ax = plt.subplots(figsize=(6, 4))
    keys = sorted(sizes)
    ax.bar([str(k) for k in keys], [sizes[k] for k in keys], color="#572")
    ax.set_xlabel("parts per message")
    ax.set_ylabel("messages")
    ax.set_title("Segmentation profile")
    fig.tight_layout()
    path = outdir / "segmentation_profile.png"
    fig.savefig(path)
    plt.close(fig)
    paths.append(path)

    return paths


def render_report(trace_path: str | Path, outdir: str | Path) -> dict:
    """Full report: summary.tsv plus figures, returning the headline
    numbers for the CLI to print."""
    events = read_trace(trace_path)
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    write_summary(events, outdir / "summary.tsv")
    figures = render_figures(events, outdir)
    summary = summarize(events)
    return {
        "segments": summary.segments,
        "delivered_segments": summary.delivered_segments,
        "lost_segments": summary.lost_segments,
        "messages": summary.messages,
        "delivered_messages": summary.delivered_messages,
        "segment_loss_rate": round(summary.segment_loss_rate, 4),
        "summary_file": str(outdir / "summary.tsv"),
        "figures": [str(p) for p in figures],
    }
