// DOM rendering. Everything here is replaceable output: state arrives
// already shaped by model.ts.

import type { AttemptRow, MessageDetail } from "./api.js";
import type { Conversation, QueueRow } from "./model.js";
import { statusLabel } from "./model.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderCounts(target: HTMLElement, counts: Record<number, number>): void {
  target.replaceChildren();
  for (const code of [0, 1, 2, 3]) {
    const badge = el("div", `count-badge status-${code}`);
    badge.append(
      el("span", "count-num", String(counts[code] ?? 0)),
      el("span", "count-label", statusLabel(code)),
    );
    target.append(badge);
  }
}

export function renderQueue(
  target: HTMLElement,
  rows: QueueRow[],
  onSelect: (id: number) => void,
): void {
  target.replaceChildren();
  if (!rows.length) {
    target.append(el("p", "empty-state", "No messages yet. Compose one above."));
    return;
  }
  const table = el("table", "queue");
  const head = el("tr");
  for (const title of ["id", "to", "body", "schedule", "status", "attempts", "campaign"]) {
    head.append(el("th", undefined, title));
  }
  table.append(head);
  for (const row of rows) {
    const tr = el("tr", row.dead ? "row-dead" : undefined);
    tr.append(
      el("td", undefined, String(row.id)),
      el("td", undefined, row.recipient),
      el("td", "preview", row.preview),
      el("td", undefined, String(row.scheduleTime)),
      el("td", `status status-${row.statusCode}`, `${row.statusCode} ${row.statusName}`),
      el("td", undefined, String(row.attempts)),
      el("td", undefined, row.campaignId ?? ""),
    );
    tr.addEventListener("click", () => onSelect(row.id));
    table.append(tr);
  }
  target.append(table);
}

export function renderDetail(target: HTMLElement, detail: MessageDetail): void {
  target.replaceChildren();
  target.append(
    el("h3", undefined, `Message #${detail.id} — ${detail.status} ${statusLabel(detail.status)}`),
    el("p", undefined, `to ${detail.to}, schedule ${detail.schedule_time}, `
      + `attempts ${detail.attempts}, created by ${detail.created_by}`),
    el("pre", "body-full", detail.body),
  );
  if (!detail.attempt_log.length) {
    target.append(el("p", "empty-state", "No attempts recorded."));
    return;
  }
  const list = el("ul", "attempts");
  for (const attempt of detail.attempt_log) {
    list.append(el("li", undefined, formatAttempt(attempt)));
  }
  target.append(el("h4", undefined, "Attempt history"), list);
}

export function formatAttempt(attempt: AttemptRow): string {
  return `${attempt.outcome} by ${attempt.worker} (${attempt.started_at} → ${attempt.finished_at})`;
}

export function renderConversations(target: HTMLElement, groups: Conversation[]): void {
  target.replaceChildren();
  if (!groups.length) {
    target.append(el("p", "empty-state", "No inbound SMS yet."));
    return;
  }
  for (const group of groups) {
    const section = el("section", "conversation");
    section.append(el("h3", undefined, group.msisdn));
    for (const turn of group.turns) {
      const pair = el("div", "turn");
      pair.append(el("div", "bubble request", `⇠ ${turn.request} (t=${turn.at})`));
      pair.append(
        el(
          "div",
          "bubble reply",
          turn.reply === null
            ? "(no reply)"
            : `⇢ ${turn.reply}${turn.replyStatus !== null ? `  [${statusLabel(turn.replyStatus)}]` : ""}`,
        ),
      );
      section.append(pair);
    }
    target.append(section);
  }
}

export function showProblem(target: HTMLElement, message: string): void {
  target.textContent = message;
  target.classList.remove("hidden");
}

export function clearProblem(target: HTMLElement): void {
  target.textContent = "";
  target.classList.add("hidden");
}
