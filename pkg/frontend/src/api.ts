/**
 * Typed client for the simulation service. Every number shown in the UI comes
 * straight out of these response payloads; the client never recomputes.
 */

import type {
  ConsistencyResponse,
  JobRecord,
  LogSummary,
  SimulateRequest,
  SimulationReportJson,
  UniverseResponse,
} from './types';

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
    readonly violations: string[] = [],
  ) {
    super(`${status}: ${detail}`);
  }
}

async function parseError(response: Response): Promise<ApiError> {
  let detail = response.statusText;
  let violations: string[] = [];
  try {
    const body = await response.json();
    if (typeof body.detail === 'string') detail = body.detail;
    if (Array.isArray(body.violations)) violations = body.violations;
  } catch {
    // non-JSON error body: keep the status text
  }
  return new ApiError(response.status, detail, violations);
}

export class ApiClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, init);
    if (!response.ok) throw await parseError(response);
    return response.json() as Promise<T>;
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.request<T>(path, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(body),
    });
  }

  uploadLog(jsonl: string): Promise<{ log_id: string; n_traces: number }> {
    return this.request(`/logs`, { method: 'POST', body: jsonl });
  }

  logSummary(logId: string): Promise<LogSummary> {
    return this.request(`/logs/${logId}/summary`);
  }

  baseVector(logId: string, universeId: string, caseId?: string):
      Promise<{ case_id: string; universe_id: string; bits: number[] }> {
    const caseQuery = caseId ? `&case=${encodeURIComponent(caseId)}` : '';
    return this.request(
      `/logs/${logId}/vector?universe_id=${universeId}${caseQuery}`);
  }

  discover(logId: string, groups: string[], minSupport: number):
      Promise<{ universe_id: string; size: number }> {
    return this.post(`/discover`,
                     { log_id: logId, groups, min_support: minSupport });
  }

  universe(universeId: string): Promise<UniverseResponse> {
    return this.request(`/universes/${universeId}`);
  }

  checkConsistency(universeId: string, vector: number[]):
      Promise<ConsistencyResponse> {
    return this.post(`/consistency`, { universe_id: universeId, vector });
  }

  startSimulation(request: SimulateRequest): Promise<JobRecord> {
    return this.post(`/simulate`, request);
  }

  startTraining(logId: string, universeId: string, config: object):
      Promise<JobRecord> {
    return this.post(`/train`,
                     { log_id: logId, universe_id: universeId, config });
  }

  job(jobId: string): Promise<JobRecord> {
    return this.request(`/jobs/${jobId}`);
  }

  report(reportId: string): Promise<SimulationReportJson> {
    return this.request(`/reports/${reportId}`);
  }

  async reportDot(reportId: string, threshold: number): Promise<string> {
    const response = await this.fetchFn(
      `${this.baseUrl}/reports/${reportId}/dfg?threshold=${threshold}`);
    if (!response.ok) throw await parseError(response);
    return response.text();
  }
}

/**
 * Poll a job until it reaches a terminal state. The callback fires on every
 * poll so the view can show progress.
 */
export async function watchJob(
  client: ApiClient,
  jobId: string,
  onUpdate: (record: JobRecord) => void,
  intervalMs = 500,
  sleep: (ms: number) => Promise<void> =
      (ms) => new Promise((r) => setTimeout(r, ms)),
): Promise<JobRecord> {
  for (;;) {
    const record = await client.job(jobId);
    onUpdate(record);
    if (record.status === 'done' || record.status === 'failed') return record;
    await sleep(intervalMs);
  }
}
