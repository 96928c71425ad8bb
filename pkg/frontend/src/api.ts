/**
 * Typed client for the session REST service.
 *
 * The UI holds no state the service cannot reproduce, so every method here is
 * a thin fetch wrapper over a documented endpoint. The fetch implementation is
 * injectable for tests.
 */

export interface ConsistencyTriplet {
  style: number | null;
  logic: number | null;
  entity: number | null;
  counts: Record<string, number>;
}

export interface StateSnapshot {
  tree: string; // canonical JSON text of the scene tree
  turn_index: number;
  provenance: { origin: string; source_turn_id: string | null };
}

export interface SessionTurn {
  turn_id: number;
  instruction: string;
  input_image_id: string | null;
  response_text: string;
  mode: string;
  prompt_request: string;
  prompts: string[];
  prompt_warnings: string[];
  generated_image_ids: string[];
  state_before: StateSnapshot | null;
  state_after: StateSnapshot | null;
  /** Edit-line script ("SET cat.state = sleeping\nADD REL cat | on | mat"). */
  edits: string;
  triplet: ConsistencyTriplet | null;
  status: string;
  failed_stage: string | null;
  error: string | null;
  started_at: number;
  finished_at: number;
}

export interface SessionSummary {
  session_id: string;
  turns: number;
}

export interface SessionLog {
  session_id: string;
  iut_mode: string;
  turns: SessionTurn[];
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ServiceError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

export class SessionClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(this.baseUrl + path, init);
    if (!response.ok) {
      throw new ServiceError(response.status, await response.text());
    }
    return (await response.json()) as T;
  }

  createSession(body: { image_id?: string; image_b64?: string; iut_mode?: string }) {
    return this.request<{ session_id: string; turn: SessionTurn }>("/sessions", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  postTurn(sessionId: string, instruction: string, evaluate = true) {
    return this.request<SessionTurn>(`/sessions/${sessionId}/turns`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ instruction, evaluate }),
    });
  }

  listSessions() {
    return this.request<SessionSummary[]>("/sessions");
  }

  sessionLog(sessionId: string) {
    return this.request<SessionLog>(`/sessions/${sessionId}`);
  }

  /** Canonical JSON text of the session's current scene tree. */
  async sessionState(sessionId: string): Promise<string> {
    const response = await this.fetchImpl(`${this.baseUrl}/sessions/${sessionId}/state`);
    if (!response.ok) {
      throw new ServiceError(response.status, await response.text());
    }
    return response.text();
  }

  imageUrl(imageId: string): string {
    return `${this.baseUrl}/images/${imageId}`;
  }
}
