// View-model helpers: pure shaping of API payloads for the three views.
// No business logic lives here — the server decides everything; these
// functions only arrange what it said.

import type { InboundEntry, MessageRow } from "./api.js";

export const STATUS_NAMES: Record<number, string> = {
  0: "New",
  1: "Processing",
  2: "Failed",
  3: "Sent",
};

export function statusLabel(code: number): string {
  return STATUS_NAMES[code] ?? `?${code}`;
}

export interface QueueRow {
  id: number;
  recipient: string;
  preview: string;
  scheduleTime: number;
  statusCode: number;
  statusName: string;
  attempts: number;
  campaignId: string | null;
  dead: boolean;
}

const PREVIEW_LIMIT = 48;

export function toQueueRow(message: MessageRow): QueueRow {
  const flat = message.body.replace(/\n/g, " ");
  return {
    id: message.id,
    recipient: message.to,
    preview:
      flat.length > PREVIEW_LIMIT ? `${flat.slice(0, PREVIEW_LIMIT - 1)}…` : flat,
    scheduleTime: message.schedule_time,
    statusCode: message.status,
    statusName: statusLabel(message.status),
    attempts: message.attempts,
    campaignId: message.campaign_id,
    // a Failed row with no retry left stays Failed; the server would have
    // requeued it to New otherwise, so any Failed row we can see is dead
    dead: message.status === 2,
  };
}

export interface QueueFilter {
  status?: number;
  campaignId?: string;
}

export function queueRows(messages: MessageRow[], filter: QueueFilter = {}): QueueRow[] {
  return messages
    .filter((m) => filter.status === undefined || m.status === filter.status)
    .filter((m) => filter.campaignId === undefined || m.campaign_id === filter.campaignId)
    .map(toQueueRow)
    .sort((a, b) => b.id - a.id);
}

export function statusCounts(messages: MessageRow[]): Record<number, number> {
  const counts: Record<number, number> = { 0: 0, 1: 0, 2: 0, 3: 0 };
  for (const message of messages) {
    counts[message.status] = (counts[message.status] ?? 0) + 1;
  }
  return counts;
}

export interface ConversationTurn {
  at: number;
  request: string;
  reply: string | null;
  replyStatus: number | null;
}

export interface Conversation {
  msisdn: string;
  turns: ConversationTurn[];
}

export function conversations(entries: InboundEntry[], msisdnFilter = ""): Conversation[] {
  const byMsisdn = new Map<string, ConversationTurn[]>();
  for (const entry of entries) {
    if (msisdnFilter && !entry.from.includes(msisdnFilter)) continue;
    const turns = byMsisdn.get(entry.from) ?? [];
    turns.push({
      at: entry.received_at,
      request: entry.body,
      reply: entry.reply_body,
      replyStatus: entry.reply_status,
    });
    byMsisdn.set(entry.from, turns);
  }
  return [...byMsisdn.entries()]
    .map(([msisdn, turns]) => ({ msisdn, turns }))
    .sort((a, b) => a.msisdn.localeCompare(b.msisdn));
}

export interface ComposeInput {
  mode: "single" | "campaign";
  target: string;
  body: string;
  schedule: string;
}

export interface ComposeProblem {
  field: "target" | "body" | "schedule";
  message: string;
}

// Only the checks a form must do before it can even build a request;
// real validation (phone format, placeholders, group existence) is the
// server's call and its 400 detail is surfaced inline.
export function checkCompose(input: ComposeInput): ComposeProblem[] {
  const problems: ComposeProblem[] = [];
  if (!input.target.trim()) {
    problems.push({
      field: "target",
      message: input.mode === "single" ? "recipient required" : "group required",
    });
  }
  if (!input.body.trim()) problems.push({ field: "body", message: "body required" });
  if (!/^\d+$/.test(input.schedule.trim())) {
    problems.push({ field: "schedule", message: "schedule must be a tick (integer)" });
  }
  return problems;
}

export function placeholderHints(attributes: string[]): string[] {
  const builtIns = ["name", "msisdn", "enrolment_no"];
  return [...builtIns, ...attributes.filter((a) => !builtIns.includes(a)).sort()];
}

export function collectAttributeKeys(recipients: { attributes: Record<string, string> }[]): string[] {
  const keys = new Set<string>();
  for (const recipient of recipients) {
    for (const key of Object.keys(recipient.attributes)) keys.add(key);
  }
  return [...keys].sort();
}
