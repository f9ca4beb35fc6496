/**
 * Typed client for the what-if service. Pure transport: no fairness math
 * happens in the browser, the service is the single source of numerical
 * truth.
 */

export interface FixtureInfo {
  name: string;
  description: string;
}

export interface TableRow {
  justified: Record<string, string>;
  sensitive: Record<string, string> | null;
  state: string;
  p: number;
}

export interface TableBlock {
  rows: TableRow[];
  deviation: number;
  revision?: number;
}

export interface TablesResponse {
  revision: number;
  pre: TableBlock;
  post: TableBlock | null;
  solution_status: string | null;
}

export interface ConstraintDoc {
  event: Record<string, string>;
  op: "eq" | "le" | "ge" | "interval";
  value?: number;
  low?: number;
  high?: number;
}

export interface SolveResponse {
  status: string;
  objective: number;
  revision: number;
  active_constraints: string[];
  residuals: { label: string; residual: number }[];
}

export class ServiceError extends Error {
  readonly status: number;
  readonly title: string;
  readonly conflicts: string[];

  constructor(status: number, title: string, detail: string, conflicts: string[] = []) {
    super(detail || title);
    this.status = status;
    this.title = title;
    this.conflicts = conflicts;
  }
}

async function unwrap<T>(response: Response): Promise<T> {
  if (response.ok) {
    return (await response.json()) as T;
  }
  let title = `http-${response.status}`;
  let detail = "";
  let conflicts: string[] = [];
  try {
    const body = await response.json();
    title = body.title ?? title;
    detail = body.detail ?? "";
    conflicts = body.conflicts ?? [];
  } catch {
    // non-JSON error body; keep the status-based title
  }
  throw new ServiceError(response.status, title, detail, conflicts);
}

export class ServiceClient {
  constructor(private readonly baseUrl: string) {}

  private url(path: string): string {
    return `${this.baseUrl}${path}`;
  }

  async listFixtures(): Promise<FixtureInfo[]> {
    const body = await unwrap<{ fixtures: FixtureInfo[] }>(
      await fetch(this.url("/v1/fixtures")),
    );
    return body.fixtures;
  }

  async createSession(fixture: string): Promise<string> {
    const body = await unwrap<{ id: string }>(
      await fetch(this.url("/v1/sessions"), {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ fixture }),
      }),
    );
    return body.id;
  }

  async getTables(sessionId: string): Promise<TablesResponse> {
    return unwrap(await fetch(this.url(`/v1/sessions/${sessionId}/tables`)));
  }

  async putConstraints(
    sessionId: string,
    constraints: ConstraintDoc[],
    expectedRevision?: number,
  ): Promise<number> {
    const payload: Record<string, unknown> = { constraints };
    if (expectedRevision !== undefined) {
      payload.expected_revision = expectedRevision;
    }
    const body = await unwrap<{ revision: number }>(
      await fetch(this.url(`/v1/sessions/${sessionId}/constraints`), {
        method: "PUT",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(payload),
      }),
    );
    return body.revision;
  }

  async solve(sessionId: string, mode = "auto"): Promise<SolveResponse> {
    return unwrap(
      await fetch(this.url(`/v1/sessions/${sessionId}/solve`), {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ mode }),
      }),
    );
  }

  sampleUrl(sessionId: string, count: number, seed: number): string {
    return this.url(`/v1/sessions/${sessionId}/sample?count=${count}&seed=${seed}`);
  }
}
