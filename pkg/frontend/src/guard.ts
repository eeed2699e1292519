/**
 * Client-side contradiction guard for the constraint toggle board.
 *
 * Mirrors the server's preflight exactly: the same companion adjustments
 * (applied in toggle order, never overriding an explicit toggle) and the same
 * contradiction patterns. Any edit set this guard allows must be accepted by
 * POST /simulate.
 */

import type { ConstraintInstance } from './types';

/** Tri-state per coordinate: 0 / 1 impose a bit, absent means inherit. */
export type EditMap = Map<number, 0 | 1>;

export interface Violation {
  rule: string;
  members: string[];
}

export interface BoardPreview {
  /** The vector that would be submitted: base + edits + companions. */
  bits: number[];
  /** Companion coordinates changed automatically, with their new value. */
  adjustments: Map<number, 0 | 1>;
  /** Edited plus adjusted coordinates (the graded mask). */
  mask: number[];
  violations: Violation[];
  /** Run is allowed only with at least one edit and no violations. */
  canRun: boolean;
}

function label(template: string, a: string, b: string | null): string {
  return b === null ? `${template}(${a})` : `${template}(${a},${b})`;
}

class Universe {
  private index = new Map<string, number>();

  constructor(readonly instances: ConstraintInstance[]) {
    instances.forEach((inst, i) => {
      this.index.set(label(inst.template, inst.a, inst.b), i);
    });
  }

  find(template: string, a: string, b: string | null = null): number | null {
    const k = this.index.get(label(template, a, b));
    return k === undefined ? null : k;
  }
}

/** Companion rules: toggling the keyed template/value writes these coordinates. */
function companionWrites(
  inst: ConstraintInstance,
  value: 0 | 1,
): [string, string, string | null, 0 | 1][] {
  const { a, b } = inst;
  switch (`${inst.template}=${value}`) {
    case 'Existence=1':
      return [['Absence', a, null, 0]];
    case 'Existence=0':
      return [['Absence', a, null, 1], ['Exactly1', a, null, 0]];
    case 'Absence=1':
      return [['Existence', a, null, 0], ['Exactly1', a, null, 0]];
    case 'Absence=0':
      return [['Existence', a, null, 1]];
    case 'Exactly1=1':
      return [['Existence', a, null, 1], ['Absence', a, null, 0]];
    case 'ChainResponse=1':
      return [['AlternateResponse', a, b, 1], ['Response', a, b, 1]];
    case 'AlternateResponse=1':
      return [['Response', a, b, 1]];
    case 'AlternateResponse=0':
      return [['ChainResponse', a, b, 0]];
    case 'Response=0':
      return [['AlternateResponse', a, b, 0], ['ChainResponse', a, b, 0]];
    default:
      return [];
  }
}

/**
 * The contradiction patterns the server rejects. The relation rules only fire
 * when Existence of the activating activity is demanded, because without an
 * activation both sides hold vacuously.
 */
export function findViolations(
  instances: ConstraintInstance[],
  bits: number[],
): Violation[] {
  const uni = new Universe(instances);
  const val = (t: string, a: string, b: string | null = null): number | null => {
    const k = uni.find(t, a, b);
    return k === null ? null : bits[k];
  };
  const out: Violation[] = [];
  const activities = new Set<string>();
  for (const inst of instances) {
    activities.add(inst.a);
    if (inst.b !== null) activities.add(inst.b);
  }

  for (const a of [...activities].sort()) {
    const ex = val('Existence', a);
    const ab = val('Absence', a);
    const x1 = val('Exactly1', a);
    if (ex === 1 && ab === 1) {
      out.push({ rule: 'existence-vs-absence',
                 members: [`Existence(${a})`, `Absence(${a})`] });
    }
    if (x1 === 1 && ab === 1) {
      out.push({ rule: 'exactly1-vs-absence',
                 members: [`Exactly1(${a})`, `Absence(${a})`] });
    }
    if (x1 === 1 && ex === 0) {
      out.push({ rule: 'exactly1-without-existence',
                 members: [`Exactly1(${a})`, `Existence(${a})`] });
    }
  }
  instances.forEach((inst, k) => {
    if (inst.template === 'ExclusiveChoice' && bits[k] === 1) {
      if (val('Existence', inst.a) === 1 && val('Existence', inst.b!) === 1) {
        out.push({
          rule: 'exclusive-choice-vs-both-existing',
          members: [label(inst.template, inst.a, inst.b),
                    `Existence(${inst.a})`, `Existence(${inst.b})`],
        });
      }
    }
  });
  const negToPos: Record<string, string> = {
    NotChainSuccession: 'ChainResponse',
    NotSuccession: 'Response',
  };
  instances.forEach((inst, k) => {
    const pos = negToPos[inst.template];
    if (pos === undefined || bits[k] !== 1) return;
    if (val(pos, inst.a, inst.b) === 1 && val('Existence', inst.a) === 1) {
      out.push({
        rule: 'negative-vs-positive-relation',
        members: [label(inst.template, inst.a, inst.b),
                  label(pos, inst.a, inst.b)],
      });
    }
  });
  return out;
}

/**
 * Preview the submission: apply edits (in insertion order) to the base
 * vector, write companion coordinates that are not explicitly edited, and
 * check the result against the contradiction patterns.
 */
export function previewBoard(
  instances: ConstraintInstance[],
  base: number[],
  edits: EditMap,
): BoardPreview {
  const uni = new Universe(instances);
  const bits = base.slice();
  for (const [k, v] of edits) bits[k] = v;

  const adjustments = new Map<number, 0 | 1>();
  for (const [k, v] of edits) {
    for (const [t, a, b, value] of companionWrites(instances[k], v)) {
      const target = uni.find(t, a, b);
      if (target === null || edits.has(target)) continue;
      if (bits[target] !== value) {
        bits[target] = value;
        adjustments.set(target, value);
      }
    }
  }
  const violations = findViolations(instances, bits);
  const mask = [...new Set([...edits.keys(), ...adjustments.keys()])]
    .sort((x, y) => x - y);
  return {
    bits,
    adjustments,
    mask,
    violations,
    canRun: edits.size > 0 && violations.length === 0,
  };
}

/** Cycle a coordinate through inherit -> imposed-1 -> imposed-0 -> inherit. */
export function cycleToggle(edits: EditMap, coordinate: number): EditMap {
  const next = new Map(edits);
  const current = next.get(coordinate);
  if (current === undefined) next.set(coordinate, 1);
  else if (current === 1) next.set(coordinate, 0);
  else next.delete(coordinate);
  return next;
}
