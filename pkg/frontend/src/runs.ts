/**
 * Run lifecycle and results rendering: launch a simulation, poll its job,
 * then display the report. Every displayed number is copied verbatim from a
 * service response field — formatting only, no client-side computation.
 */

import { ApiClient, ApiError, watchJob } from './api';
import { parseDot, renderSvg } from './dot';
import type { EditMap } from './guard';
import type { JobRecord, SimulationReportJson } from './types';

export interface RunSettings {
  checkpointId: string;
  universeId: string;
  baseLogId: string;
  nTraces: number;
  maxLen: number;
  seed: number;
  sampling: 'multinomial' | 'argmax';
  temperature: number;
}

export interface CompletedRun {
  reportId: string;
  edits: [number, number][];
  report: SimulationReportJson;
}

/** Format a 0..1 rate exactly as the service reported it, as a percentage. */
export function formatRate(rate: number): string {
  return `${(100 * rate).toFixed(1)}%`;
}

export async function launchRun(
  client: ApiClient,
  settings: RunSettings,
  edits: EditMap,
  onProgress: (record: JobRecord) => void,
): Promise<CompletedRun> {
  const editPairs: [number, number][] = [...edits.entries()];
  const job = await client.startSimulation({
    checkpoint_id: settings.checkpointId,
    universe_id: settings.universeId,
    base_log_id: settings.baseLogId,
    edits: editPairs,
    n_traces: settings.nTraces,
    max_len: settings.maxLen,
    seed: settings.seed,
    sampling: settings.sampling,
    temperature: settings.temperature,
  });
  const finished = await watchJob(client, job.job_id, onProgress);
  if (finished.status === 'failed') {
    throw new ApiError(500, finished.error ?? 'simulation job failed');
  }
  const reportId = finished.result!.split('/').pop()!;
  const report = await client.report(reportId);
  return { reportId, edits: editPairs, report };
}

function element(tag: string, className: string, text?: string): HTMLElement {
  const el = document.createElement(tag);
  el.className = className;
  if (text !== undefined) el.textContent = text;
  return el;
}

export function renderResults(
  root: HTMLElement,
  run: CompletedRun,
  dot: string | null,
): void {
  root.textContent = '';
  const conformance = run.report.conformance;

  const gauge = element('div', 'satisfaction-gauge');
  gauge.appendChild(element('span', 'gauge-label', 'overall satisfaction'));
  gauge.appendChild(element('span', 'gauge-value',
                            formatRate(conformance.overall_rate)));
  root.appendChild(gauge);

  const groups = element('div', 'group-rates');
  for (const [group, rate] of Object.entries(conformance.per_group)) {
    const chip = element('span', 'group-chip');
    chip.textContent = `${group}: ${formatRate(rate)}`;
    groups.appendChild(chip);
  }
  root.appendChild(groups);

  const table = document.createElement('table');
  table.className = 'constraint-rates';
  const head = document.createElement('tr');
  for (const column of ['constraint', 'imposed', 'rate']) {
    head.appendChild(element('th', '', column));
  }
  table.appendChild(head);
  for (const row of conformance.per_constraint) {
    const tr = document.createElement('tr');
    tr.appendChild(element('td', '', row.instance));
    tr.appendChild(element('td', '', String(row.imposed)));
    tr.appendChild(element('td', '', formatRate(row.rate)));
    table.appendChild(tr);
  }
  root.appendChild(table);

  const truncated = run.report.traces.filter((t) => t.truncated).length;
  root.appendChild(element(
    'p', 'trace-note',
    `${run.report.traces.length} traces generated, ${truncated} truncated`));

  if (dot !== null) {
    const graph = element('div', 'dfg-view');
    graph.innerHTML = renderSvg(parseDot(dot));
    root.appendChild(graph);
  }

  const inspector = element('details', 'trace-inspector');
  inspector.appendChild(element('summary', '', 'sample traces'));
  for (const trace of run.report.traces.slice(0, 10)) {
    inspector.appendChild(element('div', 'trace-line',
                                  trace.activities.join(' → ')));
  }
  root.appendChild(inspector);
}

/** Side-by-side history of completed runs for what-if comparison. */
export function renderComparison(root: HTMLElement, runs: CompletedRun[]): void {
  root.textContent = '';
  for (const run of runs) {
    const card = element('div', 'comparison-card');
    card.dataset.reportId = run.reportId;
    card.appendChild(element('span', 'comparison-edits',
                             run.edits.map(([k, v]) => `#${k}=${v}`).join(', ')));
    card.appendChild(element('span', 'comparison-rate',
                             formatRate(run.report.conformance.overall_rate)));
    root.appendChild(card);
  }
}
