import type {
  DecisionAck,
  DecisionBody,
  ReportDoc,
  SessionInfo,
  StudyMeta,
  TaskPayload,
} from "./types";

/** Error carrying the service's message verbatim, so validation rejections
 * can be surfaced to the participant unchanged. */
export class ApiError extends Error {
  constructor(public status: number, public detail: string) {
    super(detail);
    this.name = "ApiError";
  }
}

async function parseError(res: Response): Promise<ApiError> {
  let detail = `${res.status} ${res.statusText}`;
  try {
    const body = await res.json();
    if (body && typeof body.detail === "string") detail = body.detail;
  } catch {
    // non-JSON error body; keep the status line
  }
  return new ApiError(res.status, detail);
}

/** The slice of the service the task controller needs; tests substitute an
 * in-memory fake. */
export interface StudyApi {
  getTask(sessionId: string, index: number): Promise<TaskPayload>;
  getEvidence(sessionId: string, index: number, hypothesis: number): Promise<ReportDoc>;
  submitDecision(sessionId: string, body: DecisionBody): Promise<DecisionAck>;
}

export class ApiClient implements StudyApi {
  constructor(
    private baseUrl: string,
    private fetchImpl: typeof fetch = fetch,
  ) {}

  private async get<T>(path: string): Promise<T> {
    const res = await this.fetchImpl(this.baseUrl + path);
    if (!res.ok) throw await parseError(res);
    return (await res.json()) as T;
  }

  private async post<T>(path: string, body: unknown): Promise<T> {
    const res = await this.fetchImpl(this.baseUrl + path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!res.ok) throw await parseError(res);
    return (await res.json()) as T;
  }

  studyMeta(): Promise<StudyMeta> {
    return this.get("/study");
  }

  createSession(seed?: number): Promise<SessionInfo> {
    return this.post("/sessions", seed === undefined ? {} : { seed });
  }

  getTask(sessionId: string, index: number): Promise<TaskPayload> {
    return this.get(`/sessions/${sessionId}/tasks/${index}`);
  }

  getEvidence(sessionId: string, index: number, hypothesis: number): Promise<ReportDoc> {
    return this.get(
      `/sessions/${sessionId}/tasks/${index}/evidence?hypothesis=${hypothesis}`,
    );
  }

  submitDecision(sessionId: string, body: DecisionBody): Promise<DecisionAck> {
    return this.post(`/sessions/${sessionId}/decisions`, body);
  }

  submitRating(sessionId: string, metric: string, value: number): Promise<unknown> {
    return this.post(`/sessions/${sessionId}/ratings`, { metric, value });
  }

  exportSession(sessionId: string): Promise<any> {
    return this.get(`/sessions/${sessionId}/export`);
  }
}
