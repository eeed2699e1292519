/**
 * Minimal renderer for the service's directly-follows graphs.
 *
 * The server emits a restricted DOT dialect (quoted identifiers, one node or
 * edge statement per line, counts as edge labels). This module parses that
 * dialect and lays the nodes out left-to-right by breadth-first depth from
 * the start pseudo-node — no general-purpose graph layout.
 */

export interface DfgNode {
  id: string;
  label: string;
}

export interface DfgEdge {
  from: string;
  to: string;
  count: number;
}

export interface Dfg {
  nodes: DfgNode[];
  edges: DfgEdge[];
}

const NODE_RE = /^\s*"([^"]+)"\s*\[[^\]]*label="([^"]*)"[^\]]*\];?\s*$/;
const EDGE_RE = /^\s*"([^"]+)"\s*->\s*"([^"]+)"\s*\[label="(\d+)"\];?\s*$/;

export function parseDot(dot: string): Dfg {
  const nodes: DfgNode[] = [];
  const edges: DfgEdge[] = [];
  for (const line of dot.split('\n')) {
    const edge = EDGE_RE.exec(line);
    if (edge) {
      edges.push({ from: edge[1], to: edge[2], count: Number(edge[3]) });
      continue;
    }
    const node = NODE_RE.exec(line);
    if (node) {
      nodes.push({ id: node[1], label: node[2].split('\\n')[0] });
    }
  }
  return { nodes, edges };
}

/** Column per node: breadth-first distance from the start pseudo-node. */
export function layoutColumns(dfg: Dfg): Map<string, number> {
  const columns = new Map<string, number>();
  const out = new Map<string, string[]>();
  for (const e of dfg.edges) {
    (out.get(e.from) ?? out.set(e.from, []).get(e.from)!).push(e.to);
  }
  const queue: [string, number][] = [['__start__', 0]];
  while (queue.length > 0) {
    const [id, depth] = queue.shift()!;
    if (columns.has(id)) continue;
    columns.set(id, depth);
    for (const next of out.get(id) ?? []) queue.push([next, depth + 1]);
  }
  let maxDepth = 0;
  for (const d of columns.values()) maxDepth = Math.max(maxDepth, d);
  for (const node of dfg.nodes) {
    if (!columns.has(node.id)) columns.set(node.id, maxDepth + 1);
  }
  // the end pseudo-node always sits in the last column
  if (columns.has('__end__')) {
    let last = 0;
    for (const [id, d] of columns) if (id !== '__end__') last = Math.max(last, d);
    columns.set('__end__', last + 1);
  }
  return columns;
}

const COL_WIDTH = 150;
const ROW_HEIGHT = 60;
const BOX_W = 110;
const BOX_H = 36;

function escapeXml(text: string): string {
  return text.replace(/&/g, '&amp;').replace(/</g, '&lt;').replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

/** Render the graph as a standalone SVG string. */
export function renderSvg(dfg: Dfg): string {
  const columns = layoutColumns(dfg);
  const rows = new Map<number, number>();
  const position = new Map<string, { x: number; y: number }>();
  const ordered = [...dfg.nodes].sort((a, b) =>
    (columns.get(a.id)! - columns.get(b.id)!) || a.id.localeCompare(b.id));
  for (const node of ordered) {
    const col = columns.get(node.id)!;
    const row = rows.get(col) ?? 0;
    rows.set(col, row + 1);
    position.set(node.id, {
      x: 40 + col * COL_WIDTH,
      y: 40 + row * ROW_HEIGHT,
    });
  }
  let maxX = 0;
  let maxY = 0;
  for (const p of position.values()) {
    maxX = Math.max(maxX, p.x + BOX_W);
    maxY = Math.max(maxY, p.y + BOX_H);
  }
  const parts: string[] = [];
  for (const edge of dfg.edges) {
    const from = position.get(edge.from);
    const to = position.get(edge.to);
    if (!from || !to) continue;
    const x1 = from.x + BOX_W;
    const y1 = from.y + BOX_H / 2;
    const x2 = to.x;
    const y2 = to.y + BOX_H / 2;
    parts.push(
      `<line x1="${x1}" y1="${y1}" x2="${x2}" y2="${y2}" ` +
      `stroke="#889" marker-end="url(#arrow)"/>`,
      `<text x="${(x1 + x2) / 2}" y="${(y1 + y2) / 2 - 4}" ` +
      `font-size="10" fill="#556" text-anchor="middle">${edge.count}</text>`,
    );
  }
  for (const node of dfg.nodes) {
    const p = position.get(node.id)!;
    const pseudo = node.id.startsWith('__');
    parts.push(
      `<rect x="${p.x}" y="${p.y}" width="${BOX_W}" height="${BOX_H}" rx="6" ` +
      `fill="${pseudo ? '#e8e8f0' : '#f6f8fa'}" stroke="#667"/>`,
      `<text x="${p.x + BOX_W / 2}" y="${p.y + BOX_H / 2 + 4}" ` +
      `font-size="12" text-anchor="middle">${escapeXml(node.label)}</text>`,
    );
  }
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" ` +
    `width="${maxX + 40}" height="${maxY + 40}" ` +
    `viewBox="0 0 ${maxX + 40} ${maxY + 40}">` +
    `<defs><marker id="arrow" viewBox="0 0 10 10" refX="9" refY="5" ` +
    `markerWidth="7" markerHeight="7" orient="auto-start-reverse">` +
    `<path d="M 0 0 L 10 5 L 0 10 z" fill="#889"/></marker></defs>` +
    parts.join('') +
    `</svg>`
  );
}
