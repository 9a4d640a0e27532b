// Admin console wiring: three views over the JSON admin API, refreshed
// by polling (default 2s). Stale views self-heal on the next poll.

import { AdminApi, ApiError } from "./api.js";
import {
  checkCompose,
  collectAttributeKeys,
  conversations,
  placeholderHints,
  queueRows,
  statusCounts,
  type ComposeInput,
} from "./model.js";
import {
  clearProblem,
  renderConversations,
  renderCounts,
  renderDetail,
  renderQueue,
  showProblem,
} from "./views.js";

const POLL_INTERVAL_MS = 2000;

const api = new AdminApi("");

function byId(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node;
}

let statusFilter: number | undefined;
let msisdnFilter = "";
let selectedMessage: number | null = null;

async function refresh(): Promise<void> {
  try {
    const [messages, entries] = await Promise.all([api.listMessages(), api.inboundLog()]);
    renderCounts(byId("counts"), statusCounts(messages));
    renderQueue(byId("queue"), queueRows(messages, { status: statusFilter }), select);
    renderConversations(byId("conversations"), conversations(entries, msisdnFilter));
    if (selectedMessage !== null) {
      renderDetail(byId("detail"), await api.messageDetail(selectedMessage));
    }
    byId("conn").textContent = "connected";
  } catch (err) {
    byId("conn").textContent = `offline: ${err instanceof Error ? err.message : err}`;
  }
}

function select(id: number): void {
  selectedMessage = id;
  void refresh();
}

async function loadComposeHints(): Promise<void> {
  try {
    const [groups, recipients] = await Promise.all([api.listGroups(), api.listRecipients()]);
    const groupList = byId("group-list");
    groupList.replaceChildren();
    for (const group of groups) {
      const option = document.createElement("option");
      option.value = group.group_id;
      option.label = `${group.group_id} (${group.size})`;
      groupList.append(option);
    }
    byId("hints").textContent =
      "placeholders: " +
      placeholderHints(collectAttributeKeys(recipients))
        .map((hint) => `{${hint}}`)
        .join(" ");
  } catch {
    // hints are cosmetic; the next manual reload can retry
  }
}

async function submitCompose(): Promise<void> {
  const problem = byId("compose-problem");
  clearProblem(problem);
  const mode = (byId("mode") as HTMLSelectElement).value as ComposeInput["mode"];
  const input: ComposeInput = {
    mode,
    target: (byId("target") as HTMLInputElement).value,
    body: (byId("body") as HTMLTextAreaElement).value,
    schedule: (byId("schedule") as HTMLInputElement).value,
  };
  const problems = checkCompose(input);
  if (problems.length) {
    showProblem(problem, problems.map((p) => `${p.field}: ${p.message}`).join("; "));
    return;
  }
  try {
    if (mode === "single") {
      await api.submitMessage(input.target.trim(), input.body, Number(input.schedule));
    } else {
      const created = await api.submitCampaign(
        input.body,
        input.target.trim(),
        Number(input.schedule),
      );
      byId("compose-note").textContent =
        `campaign ${created.campaign_id}: ${created.count} messages queued`;
    }
    (byId("body") as HTMLTextAreaElement).value = "";
    await refresh();
  } catch (err) {
    // the server's validation detail (bad msisdn, unknown placeholder,
    // unknown group) renders inline, per the thin-client rule
    showProblem(problem, err instanceof ApiError ? err.message : String(err));
  }
}

export function start(): void {
  byId("compose-submit").addEventListener("click", () => void submitCompose());
  (byId("status-filter") as HTMLSelectElement).addEventListener("change", (event) => {
    const value = (event.target as HTMLSelectElement).value;
    statusFilter = value === "" ? undefined : Number(value);
    void refresh();
  });
  (byId("msisdn-filter") as HTMLInputElement).addEventListener("input", (event) => {
    msisdnFilter = (event.target as HTMLInputElement).value.trim();
    void refresh();
  });
  (byId("mode") as HTMLSelectElement).addEventListener("change", (event) => {
    const mode = (event.target as HTMLSelectElement).value;
    byId("target-label").textContent = mode === "single" ? "recipient" : "group";
  });
  void loadComposeHints();
  void refresh();
  setInterval(() => void refresh(), POLL_INTERVAL_MS);
}

start();
