/**
 * Payload types mirroring the simulation service's JSON API.
 */

/** One grounded constraint: a template applied to one or two activities. */
export interface ConstraintInstance {
  template: string;
  a: string;
  b: string | null;
}

export type TemplateGroup = 'E' | 'C' | 'PR' | 'NR';

export interface UniverseResponse {
  universe_id: string;
  size: number;
  instances: ConstraintInstance[];
}

export interface LogSummary {
  log_id: string;
  n_traces: number;
  n_events: number;
  activities: string[];
  length_min: number;
  length_max: number;
  length_mean: number;
}

export interface JobRecord {
  job_id: string;
  kind: 'train' | 'simulate' | 'discover';
  status: 'queued' | 'running' | 'done' | 'failed';
  progress: number;
  result: string | null;
  error: string | null;
}

export interface ConstraintRate {
  coordinate: number;
  instance: string;
  imposed: number;
  rate: number;
}

export interface ConformanceJson {
  overall_rate: number;
  per_group: Record<string, number>;
  per_constraint: ConstraintRate[];
  per_trace: { index: number; satisfied: boolean }[];
}

export interface GeneratedTraceJson {
  activities: string[];
  remaining_times: number[];
  truncated: boolean;
}

export interface SimulationReportJson {
  config: Record<string, unknown>;
  universe: ConstraintInstance[];
  universe_fingerprint: string;
  imposed_vector: number[];
  mask: number[];
  auto_adjustments: Record<string, number>;
  traces: GeneratedTraceJson[];
  conformance: ConformanceJson;
}

export interface ConsistencyResponse {
  violations: string[];
  consistent: boolean;
}

export interface SimulateRequest {
  checkpoint_id: string;
  universe_id: string;
  edits: [number, number][];
  base_log_id?: string;
  base_case?: string;
  base?: number[];
  n_traces?: number;
  max_len?: number;
  sampling?: 'multinomial' | 'argmax';
  temperature?: number;
  seed?: number;
  seed_activities?: string[];
}

/** Classification of each template into its display group. */
export const TEMPLATE_GROUPS: Record<string, TemplateGroup> = {
  Existence: 'E',
  Absence: 'E',
  Exactly1: 'E',
  Choice: 'C',
  ExclusiveChoice: 'C',
  Response: 'PR',
  Precedence: 'PR',
  AlternateResponse: 'PR',
  ChainResponse: 'PR',
  NotCoExistence: 'NR',
  NotSuccession: 'NR',
  NotChainSuccession: 'NR',
};

export const GROUP_LABELS: Record<TemplateGroup, string> = {
  E: 'Existence',
  C: 'Choice',
  PR: 'Positive Relations',
  NR: 'Negative Relations',
};

export function instanceLabel(inst: ConstraintInstance): string {
  return inst.b === null
    ? `${inst.template}(${inst.a})`
    : `${inst.template}(${inst.a},${inst.b})`;
}
