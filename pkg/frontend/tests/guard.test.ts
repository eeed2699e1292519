import { describe, expect, it } from 'vitest';

import { cycleToggle, previewBoard } from '../src/guard';
import type { EditMap } from '../src/guard';
import type { ConstraintInstance } from '../src/types';
import session from './fixtures/guard-session.json';

const find = (instances: ConstraintInstance[], template: string, a: string,
              b: string | null = null): number => {
  const k = instances.findIndex(
    (i) => i.template === template && i.a === a && i.b === b);
  if (k < 0) throw new Error(`missing ${template}(${a},${b})`);
  return k;
};

const INSTANCES = session.instances as ConstraintInstance[];
const ZERO_BASE = INSTANCES.map(() => 0);

describe('cycleToggle', () => {
  it('cycles inherit -> 1 -> 0 -> inherit', () => {
    let edits: EditMap = new Map();
    edits = cycleToggle(edits, 3);
    expect(edits.get(3)).toBe(1);
    edits = cycleToggle(edits, 3);
    expect(edits.get(3)).toBe(0);
    edits = cycleToggle(edits, 3);
    expect(edits.has(3)).toBe(false);
  });

  it('does not mutate its input', () => {
    const edits: EditMap = new Map([[1, 1]]);
    cycleToggle(edits, 1);
    expect(edits.get(1)).toBe(1);
  });
});

describe('previewBoard', () => {
  it('requires at least one edit to run', () => {
    const preview = previewBoard(INSTANCES, ZERO_BASE, new Map());
    expect(preview.canRun).toBe(false);
    expect(preview.violations).toEqual([]);
    expect(preview.mask).toEqual([]);
  });

  it('imposing Existence clears the Absence companion', () => {
    const ex = find(INSTANCES, 'Existence', 'A');
    const ab = find(INSTANCES, 'Absence', 'A');
    const base = ZERO_BASE.slice();
    base[ab] = 1; // A absent in the base trace
    const preview = previewBoard(INSTANCES, base, new Map([[ex, 1]]));
    expect(preview.bits[ex]).toBe(1);
    expect(preview.bits[ab]).toBe(0);
    expect(preview.adjustments.get(ab)).toBe(0);
    expect(preview.mask).toEqual([ex, ab].sort((x, y) => x - y));
    expect(preview.canRun).toBe(true);
  });

  it('never adjusts an explicitly toggled coordinate', () => {
    const ex = find(INSTANCES, 'Existence', 'A');
    const ab = find(INSTANCES, 'Absence', 'A');
    const preview = previewBoard(
      INSTANCES, ZERO_BASE, new Map([[ex, 1], [ab, 1]]));
    expect(preview.bits[ab]).toBe(1);
    expect(preview.adjustments.has(ab)).toBe(false);
    expect(preview.canRun).toBe(false);
    expect(preview.violations.map((v) => v.rule))
      .toContain('existence-vs-absence');
  });

  it('chains positive-relation companions', () => {
    const cr = find(INSTANCES, 'ChainResponse', 'A', 'B');
    const ar = find(INSTANCES, 'AlternateResponse', 'A', 'B');
    const re = find(INSTANCES, 'Response', 'A', 'B');
    const preview = previewBoard(INSTANCES, ZERO_BASE, new Map([[cr, 1]]));
    expect(preview.bits[ar]).toBe(1);
    expect(preview.bits[re]).toBe(1);
    expect(preview.canRun).toBe(true);
  });

  it('negative-vs-positive contradictions only fire on demanded activation', () => {
    const ns = find(INSTANCES, 'NotSuccession', 'A', 'B');
    const re = find(INSTANCES, 'Response', 'A', 'B');
    const ex = find(INSTANCES, 'Existence', 'A');
    const vacuous = previewBoard(
      INSTANCES, ZERO_BASE, new Map([[ns, 1], [re, 1]]));
    expect(vacuous.canRun).toBe(true);
    const activated = previewBoard(
      INSTANCES, ZERO_BASE, new Map([[ns, 1], [re, 1], [ex, 1]]));
    expect(activated.canRun).toBe(false);
    expect(activated.violations.map((v) => v.rule))
      .toContain('negative-vs-positive-relation');
  });
});

/**
 * Replay a scripted 200-interaction toggle session against verdicts recorded
 * from the backend's edit validator. The contract under test: the guard and
 * the server agree on every interaction, so no permitted run can come back
 * with a consistency rejection.
 */
describe('guard/server parity', () => {
  it('matches the recorded server verdict on all 200 interactions', () => {
    const bases = session.bases as number[][];
    let base = bases[0];
    let edits: EditMap = new Map();
    let accepted = 0;
    let rejected = 0;
    let clientAllowedServerRejected = 0;

    session.interactions.forEach((step: any, index: number) => {
      if (step.type === 'reset') {
        edits = new Map();
      } else if (step.type === 'select-base') {
        base = bases[step.base];
        edits = new Map();
      } else {
        edits = cycleToggle(edits, step.coordinate);
      }
      const preview = previewBoard(INSTANCES, base, edits);
      const verdict = step.verdict;

      if (preview.canRun && verdict.rejected) clientAllowedServerRejected += 1;
      expect(preview.canRun, `interaction ${index}`).toBe(verdict.runnable);
      if (verdict.runnable) {
        accepted += 1;
        expect(preview.bits, `interaction ${index} bits`).toEqual(verdict.bits);
        expect(preview.mask, `interaction ${index} mask`).toEqual(verdict.mask);
        const adjusted = Object.fromEntries(
          [...preview.adjustments].map(([k, v]) => [String(k), v]));
        expect(adjusted, `interaction ${index} adjustments`)
          .toEqual(verdict.adjustments);
      } else if (verdict.rejected) {
        rejected += 1;
        expect(preview.violations.length, `interaction ${index} violations`)
          .toBeGreaterThan(0);
      }
    });

    expect(clientAllowedServerRejected).toBe(0);
    // the session must exercise both branches to mean anything
    expect(accepted).toBeGreaterThan(20);
    expect(rejected).toBeGreaterThan(20);
  });
});
