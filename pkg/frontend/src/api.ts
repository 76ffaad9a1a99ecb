/**
 * Thin client for the rule questionnaire service. Every displayed statistic
 * comes verbatim from these payloads; the client never computes or requests
 * outcome data.
 */

export interface CardFeatureRow {
  name: string;
  subpopulation: string;
  population: string;
}

export interface CardPayload {
  rule_id: string;
  features: CardFeatureRow[];
}

export interface SessionSummary {
  session_id: string;
  expert_id: string;
  cursor: number;
  total: number;
}

export interface NextResponse {
  done: boolean;
  cursor: number;
  total: number;
  card?: CardPayload;
}

export interface SubmitAck {
  ok: boolean;
  cursor: number;
  duplicate: boolean;
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function asJson<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = await response.json();
      if (body && typeof body.detail === "string") detail = body.detail;
    } catch {
      // keep the status text
    }
    throw new ApiError(response.status, detail);
  }
  return (await response.json()) as T;
}

export class QuestionnaireApi {
  constructor(
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
    private readonly base: string = "",
  ) {}

  startSession(expertId: string): Promise<SessionSummary> {
    return this.request<SessionSummary>("/sessions", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ expert_id: expertId }),
    });
  }

  nextRule(sessionId: string): Promise<NextResponse> {
    return this.request<NextResponse>(`/sessions/${sessionId}/next`);
  }

  submitAssessment(
    sessionId: string,
    ruleId: string,
    rating: number,
    elapsedMs: number,
  ): Promise<SubmitAck> {
    return this.request<SubmitAck>(`/sessions/${sessionId}/assessments`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ rule_id: ruleId, rating, elapsed_ms: elapsedMs }),
    });
  }

  private request<T>(path: string, init?: RequestInit): Promise<T> {
    return this.fetchImpl(this.base + path, init).then((r) => asJson<T>(r));
  }
}
