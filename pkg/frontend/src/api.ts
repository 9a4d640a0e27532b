// Typed client for the feed service's JSON admin API. The console is a
// thin client: every mutation goes through these calls, every displayed
// state comes back from them.

export interface MessageRow {
  id: number;
  to: string;
  body: string;
  schedule_time: number;
  status: number;
  status_name: string;
  claimed_by: string | null;
  claimed_at: number | null;
  attempts: number;
  created_by: string;
  campaign_id: string | null;
}

export interface AttemptRow {
  worker: string;
  started_at: number;
  finished_at: number;
  outcome: string;
}

export interface MessageDetail extends MessageRow {
  attempt_log: AttemptRow[];
}

export interface InboundEntry {
  id: number;
  from: string;
  body: string;
  received_at: number;
  reply_message_id: number | null;
  reply_body: string | null;
  reply_status: number | null;
}

export interface GroupRow {
  group_id: string;
  predicate: Record<string, string>;
  size: number;
}

export interface RecipientRow {
  msisdn: string;
  name: string;
  enrolment_no: string | null;
  attributes: Record<string, string>;
}

export class ApiError extends Error {
  constructor(readonly status: number, detail: string) {
    super(detail);
  }
}

type FetchLike = typeof fetch;

export class AdminApi {
  constructor(
    private readonly base: string = "",
    private readonly fetchFn: FetchLike = fetch,
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(`${this.base}${path}`, init);
    if (!response.ok) {
      let detail = `HTTP ${response.status}`;
      try {
        const payload = await response.json();
        if (payload && typeof payload.detail === "string") detail = payload.detail;
      } catch {
        // keep the generic detail
      }
      throw new ApiError(response.status, detail);
    }
    if (response.status === 204) return undefined as T;
    return (await response.json()) as T;
  }

  async listMessages(status?: number): Promise<MessageRow[]> {
    const query = status === undefined ? "" : `?status=${status}`;
    const payload = await this.request<{ messages: MessageRow[] }>(
      `/api/messages${query}`,
    );
    return payload.messages;
  }

  messageDetail(id: number): Promise<MessageDetail> {
    return this.request<MessageDetail>(`/api/messages/${id}`);
  }

  submitMessage(to: string, body: string, scheduleTime: number): Promise<{ id: number; status: number }> {
    return this.request(`/api/messages`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ to, body, schedule_time: scheduleTime }),
    });
  }

  submitCampaign(
    template: string,
    groupId: string,
    scheduleTime: number,
  ): Promise<{ campaign_id: string; count: number }> {
    return this.request(`/api/campaigns`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ template, group_id: groupId, schedule_time: scheduleTime }),
    });
  }

  async listGroups(): Promise<GroupRow[]> {
    const payload = await this.request<{ groups: GroupRow[] }>(`/api/groups`);
    return payload.groups;
  }

  async listRecipients(): Promise<RecipientRow[]> {
    const payload = await this.request<{ recipients: RecipientRow[] }>(`/api/recipients`);
    return payload.recipients;
  }

  async inboundLog(): Promise<InboundEntry[]> {
    const payload = await this.request<{ entries: InboundEntry[] }>(`/api/inbound-log`);
    return payload.entries;
  }
}
