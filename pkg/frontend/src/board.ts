/**
 * Constraint toggle board: one tri-state control per universe coordinate,
 * grouped by template family, with the contradiction guard rendered live.
 */

import { cycleToggle, previewBoard } from './guard';
import type { BoardPreview, EditMap } from './guard';
import type { ConstraintInstance, TemplateGroup } from './types';
import { GROUP_LABELS, TEMPLATE_GROUPS, instanceLabel } from './types';

export interface BoardCallbacks {
  onChange: (edits: EditMap, preview: BoardPreview) => void;
}

export class ConstraintBoard {
  private edits: EditMap = new Map();
  private preview: BoardPreview;

  constructor(
    private readonly root: HTMLElement,
    private readonly instances: ConstraintInstance[],
    private readonly base: number[],
    private readonly callbacks: BoardCallbacks,
  ) {
    this.preview = previewBoard(instances, base, this.edits);
    this.render();
  }

  currentEdits(): EditMap {
    return new Map(this.edits);
  }

  currentPreview(): BoardPreview {
    return this.preview;
  }

  toggle(coordinate: number): void {
    this.edits = cycleToggle(this.edits, coordinate);
    this.refresh();
  }

  reset(): void {
    this.edits = new Map();
    this.refresh();
  }

  private refresh(): void {
    this.preview = previewBoard(this.instances, this.base, this.edits);
    this.render();
    this.callbacks.onChange(this.currentEdits(), this.preview);
  }

  private stateOf(coordinate: number): string {
    const edited = this.edits.get(coordinate);
    if (edited !== undefined) return edited === 1 ? 'imposed-1' : 'imposed-0';
    if (this.preview.adjustments.has(coordinate)) return 'adjusted';
    return 'inherit';
  }

  private render(): void {
    this.root.textContent = '';
    const byGroup = new Map<TemplateGroup, number[]>();
    this.instances.forEach((inst, k) => {
      const group = TEMPLATE_GROUPS[inst.template];
      if (!byGroup.has(group)) byGroup.set(group, []);
      byGroup.get(group)!.push(k);
    });

    for (const group of ['E', 'C', 'PR', 'NR'] as TemplateGroup[]) {
      const coords = byGroup.get(group);
      if (!coords) continue;
      const section = document.createElement('section');
      section.className = 'board-group';
      const heading = document.createElement('h3');
      heading.textContent = GROUP_LABELS[group];
      section.appendChild(heading);

      for (const k of coords) {
        const row = document.createElement('div');
        row.className = `board-row state-${this.stateOf(k)}`;
        row.dataset.coordinate = String(k);

        const name = document.createElement('span');
        name.className = 'constraint-name';
        name.textContent = instanceLabel(this.instances[k]);
        row.appendChild(name);

        const baseBit = document.createElement('span');
        baseBit.className = 'base-bit';
        baseBit.textContent = `base ${this.base[k]}`;
        row.appendChild(baseBit);

        const button = document.createElement('button');
        button.className = 'toggle';
        const edited = this.edits.get(k);
        button.textContent =
          edited === undefined ? 'inherit' : edited === 1 ? 'impose 1' : 'impose 0';
        button.addEventListener('click', () => this.toggle(k));
        row.appendChild(button);

        const adjusted = this.preview.adjustments.get(k);
        if (adjusted !== undefined) {
          const badge = document.createElement('span');
          badge.className = 'adjusted-badge';
          badge.textContent = `auto-set ${adjusted}`;
          row.appendChild(badge);
        }
        section.appendChild(row);
      }
      this.root.appendChild(section);
    }

    const guard = document.createElement('div');
    guard.className = this.preview.violations.length > 0
      ? 'guard guard-blocked' : 'guard guard-clear';
    if (this.preview.violations.length > 0) {
      const list = document.createElement('ul');
      for (const violation of this.preview.violations) {
        const item = document.createElement('li');
        item.textContent = `${violation.rule}: ${violation.members.join(' vs ')}`;
        list.appendChild(item);
      }
      guard.appendChild(list);
    } else {
      guard.textContent = this.edits.size === 0
        ? 'Toggle constraints to define a what-if condition.'
        : 'Edit set is consistent.';
    }
    this.root.appendChild(guard);
  }
}
