/**
 * Application shell: connects the toggle board, run launcher, and results
 * views to the simulation service.
 */

import { ApiClient, ApiError } from './api';
import { ConstraintBoard } from './board';
import type { BoardPreview } from './guard';
import { launchRun, renderComparison, renderResults } from './runs';
import type { CompletedRun, RunSettings } from './runs';

interface AppElements {
  connectForm: HTMLFormElement;
  board: HTMLElement;
  runButton: HTMLButtonElement;
  resetButton: HTMLButtonElement;
  status: HTMLElement;
  results: HTMLElement;
  comparison: HTMLElement;
}

function requireElement<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
}

function readSettings(form: HTMLFormElement): RunSettings & { server: string } {
  const data = new FormData(form);
  const text = (name: string) => String(data.get(name) ?? '').trim();
  return {
    server: text('server') || 'http://127.0.0.1:8000',
    checkpointId: text('checkpoint'),
    universeId: text('universe'),
    baseLogId: text('baseLog'),
    nTraces: Number(text('nTraces') || '300'),
    maxLen: Number(text('maxLen') || '50'),
    seed: Number(text('seed') || '0'),
    sampling: (text('sampling') || 'multinomial') as 'multinomial' | 'argmax',
    temperature: Number(text('temperature') || '1.0'),
  };
}

export async function startApp(): Promise<void> {
  const els: AppElements = {
    connectForm: requireElement('connect-form'),
    board: requireElement('board'),
    runButton: requireElement('run-button'),
    resetButton: requireElement('reset-button'),
    status: requireElement('status'),
    results: requireElement('results'),
    comparison: requireElement('comparison'),
  };
  const history: CompletedRun[] = [];
  let board: ConstraintBoard | null = null;
  let client: ApiClient | null = null;
  let settings: (RunSettings & { server: string }) | null = null;

  const setStatus = (text: string, isError = false) => {
    els.status.textContent = text;
    els.status.className = isError ? 'status status-error' : 'status';
  };

  els.connectForm.addEventListener('submit', async (event) => {
    event.preventDefault();
    settings = readSettings(els.connectForm);
    client = new ApiClient(settings.server);
    try {
      const universe = await client.universe(settings.universeId);
      const summary = await client.logSummary(settings.baseLogId);
      const base = await client.baseVector(settings.baseLogId,
                                           settings.universeId);
      board = new ConstraintBoard(els.board, universe.instances, base.bits, {
        onChange: (_edits, preview: BoardPreview) => {
          els.runButton.disabled = !preview.canRun;
        },
      });
      els.runButton.disabled = true;
      setStatus(`connected: ${universe.size} constraints, ` +
                `${summary.n_traces} base traces`);
    } catch (error) {
      setStatus(error instanceof ApiError ? error.message : String(error), true);
    }
  });

  els.resetButton.addEventListener('click', () => {
    board?.reset();
    els.runButton.disabled = true;
  });

  els.runButton.addEventListener('click', async () => {
    if (!board || !client || !settings) return;
    const preview = board.currentPreview();
    if (!preview.canRun) return;
    els.runButton.disabled = true;
    try {
      setStatus('running…');
      const run = await launchRun(client, settings, board.currentEdits(),
                                  (record) => {
                                    setStatus(`running… ${Math.round(
                                        100 * record.progress)}%`);
                                  });
      history.push(run);
      const dot = await client.reportDot(run.reportId, 0.0);
      renderResults(els.results, run, dot);
      renderComparison(els.comparison, history);
      setStatus(`report ${run.reportId} ready`);
    } catch (error) {
      if (error instanceof ApiError && error.violations.length > 0) {
        setStatus(`rejected: ${error.violations.join('; ')}`, true);
      } else {
        setStatus(error instanceof ApiError ? error.message : String(error), true);
      }
    } finally {
      els.runButton.disabled = !board.currentPreview().canRun;
    }
  });
}
