// Typed client for the groundctl HTTP API. The UI never computes metrics:
// everything rendered comes verbatim out of these response payloads.

export interface CollisionEntry {
  source?: string;
  page_id?: string;
  id: string;
  count?: number;
}

export interface IngestResponse {
  chunks_indexed: number;
  collisions: CollisionEntry[];
}

export interface SourceRow {
  source_id: string;
  type: string;
  chunks: number;
}

export interface StatsResponse {
  chunks: number;
  by_type: Record<string, number>;
  sources: SourceRow[];
  dim: number;
  collisions: CollisionEntry[];
  fixture_pages: string[];
}

export interface RetrievedChunk {
  chunk_id: string;
  source_type: string;
  score: number;
  rank: number;
}

export interface TestCasesResponse {
  steps: string[];
  retrieved: RetrievedChunk[];
}

export interface GroundingStep {
  line: number;
  locator: string;
  page: string;
  outcome: string;
  counted: boolean;
}

export interface Grounding {
  resolved: number;
  total: number;
  rate: number | null;
  steps: GroundingStep[];
}

export interface ParsedStep {
  line: number;
  action: string;
  locator: string | null;
  text: string;
}

export interface ScriptResponse {
  script: string;
  parsed: ParsedStep[] | null;
  grounding: Grounding | null;
  retrieved: RetrievedChunk[];
  syntax_error?: { line: number; reason: string };
}

export interface TraceStep {
  line: number;
  action: string;
  outcome: string;
  page: string;
  detail: string;
}

export interface ExecuteResponse {
  steps: TraceStep[];
  final_state: Record<string, unknown>;
  final_page: string;
  goal_met: boolean;
  execution_success: boolean;
}

export interface ArmMetricCell {
  mean: number;
  std: number | null;
  n: number;
  ci95: [number, number] | null;
}

export interface EvalReport {
  arms: string[];
  labels: Record<string, string>;
  metrics: Record<string, Record<string, ArmMetricCell>>;
  pairwise: {
    arm_a: string;
    arm_b: string;
    metric: string;
    t: number | string;
    p: number | string;
    cohen_d: number | string;
  }[];
  failure_modes: Record<string, Record<string, number>>;
  n_records: number;
}

export interface JobStatus {
  job_id: string;
  status: "pending" | "running" | "done" | "failed";
  arms: string[];
  seeds: number[];
  report?: EvalReport;
  records?: unknown[];
  error?: string;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
    public detail: unknown = null,
  ) {
    super(message);
  }
}

export class ApiClient {
  constructor(private baseUrl: string = "") {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await fetch(this.baseUrl + path, {
      headers: { "Content-Type": "application/json" },
      ...init,
    });
    const body = await resp.json().catch(() => null);
    if (!resp.ok) {
      const envelope = (body ?? {}) as {
        code?: string;
        message?: string;
        detail?: unknown;
      };
      throw new ApiError(
        resp.status,
        envelope.code ?? "http_error",
        envelope.message ?? `HTTP ${resp.status}`,
        envelope.detail ?? null,
      );
    }
    return body as T;
  }

  ingest(documents: { name: string; type: string; content: string }[]) {
    return this.request<IngestResponse>("/ingest", {
      method: "POST",
      body: JSON.stringify({ documents }),
    });
  }

  stats() {
    return this.request<StatsResponse>("/stats");
  }

  generateTestCases(query: string, generator?: string) {
    return this.request<TestCasesResponse>("/generate-test-cases", {
      method: "POST",
      body: JSON.stringify({ query, generator }),
    });
  }

  generateScript(query: string, generator?: string) {
    return this.request<ScriptResponse>("/generate-script", {
      method: "POST",
      body: JSON.stringify({ query, generator }),
    });
  }

  execute(script: string, scenarioId?: number) {
    return this.request<ExecuteResponse>("/execute", {
      method: "POST",
      body: JSON.stringify({ script, scenario_id: scenarioId ?? null }),
    });
  }

  evaluate(arms: string[], seeds: number[]) {
    return this.request<{ job_id: string; status: string }>("/evaluate", {
      method: "POST",
      body: JSON.stringify({ arms, seeds }),
    });
  }

  jobStatus(jobId: string) {
    return this.request<JobStatus>(`/evaluate/${jobId}`);
  }
}
