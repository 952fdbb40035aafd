/**
 * Read-only node-edge rendering of a workflow with token badges. Layout
 * is a simple layered left-to-right placement by longest path from
 * Start; no editing, no dragging.
 */

import type { MarkingDoc, WorkflowDoc } from "./api.js";

const SVG_NS = "http://www.w3.org/2000/svg";
const NODE_W = 120;
const NODE_H = 44;
const GAP_X = 60;
const GAP_Y = 24;

interface Placed {
  name: string;
  column: number;
  row: number;
  x: number;
  y: number;
}

function columnsByDepth(doc: WorkflowDoc): Map<string, number> {
  const successors = new Map<string, string[]>();
  for (const [from, to] of doc.edges) {
    const out = successors.get(from) ?? [];
    out.push(to);
    successors.set(from, out);
  }
  // longest acyclic path from Start, with a visited guard for loops
  const depth = new Map<string, number>([["Start", 0]]);
  const walk = (name: string, trail: Set<string>) => {
    for (const next of successors.get(name) ?? []) {
      if (trail.has(next)) continue;
      const candidate = (depth.get(name) ?? 0) + 1;
      if (candidate > (depth.get(next) ?? -1)) {
        depth.set(next, candidate);
        walk(next, new Set(trail).add(next));
      }
    }
  };
  walk("Start", new Set(["Start"]));
  const names = new Set<string>(["Start", "End"]);
  for (const activity of doc.activities) names.add(activity.name);
  const max = Math.max(0, ...depth.values());
  for (const name of names) {
    if (!depth.has(name)) depth.set(name, name === "End" ? max : max + 1);
  }
  return depth;
}

/** Tokens resting on a node, counting nested activity tokens onto their
 * top-level composite. */
export function tokensOn(name: string, marking: MarkingDoc | null): number {
  if (!marking) return 0;
  let count = 0;
  for (const [qualified, gens] of Object.entries(marking.tokens)) {
    if (qualified === name || qualified.startsWith(`${name}/`)) count += gens.length;
  }
  return count;
}

export function renderDiagram(
  doc: WorkflowDoc,
  marking: MarkingDoc | null,
  ownerDoc: Document = document,
): SVGSVGElement {
  const depth = columnsByDepth(doc);
  const byColumn = new Map<number, string[]>();
  for (const [name, column] of depth) {
    const bucket = byColumn.get(column) ?? [];
    bucket.push(name);
    byColumn.set(column, bucket);
  }
  const placed = new Map<string, Placed>();
  for (const [column, names] of byColumn) {
    names.sort();
    names.forEach((name, row) => {
      placed.set(name, {
        name,
        column,
        row,
        x: 20 + column * (NODE_W + GAP_X),
        y: 20 + row * (NODE_H + GAP_Y),
      });
    });
  }

  const width = 40 + (Math.max(...[...byColumn.keys()]) + 1) * (NODE_W + GAP_X);
  const height =
    40 + Math.max(...[...byColumn.values()].map((names) => names.length)) * (NODE_H + GAP_Y);
  const svg = ownerDoc.createElementNS(SVG_NS, "svg") as SVGSVGElement;
  svg.setAttribute("viewBox", `0 0 ${width} ${height}`);
  svg.setAttribute("class", "workflow-diagram");
  svg.setAttribute("role", "img");

  for (const [from, to] of doc.edges) {
    const a = placed.get(from);
    const b = placed.get(to);
    if (!a || !b) continue;
    const line = ownerDoc.createElementNS(SVG_NS, "line");
    line.setAttribute("x1", String(a.x + NODE_W));
    line.setAttribute("y1", String(a.y + NODE_H / 2));
    line.setAttribute("x2", String(b.x));
    line.setAttribute("y2", String(b.y + NODE_H / 2));
    line.setAttribute("class", "edge");
    line.setAttribute("data-edge", `${from}->${to}`);
    svg.appendChild(line);
  }

  const details = new Map(doc.activities.map((a) => [a.name, a]));
  for (const spot of placed.values()) {
    const group = ownerDoc.createElementNS(SVG_NS, "g");
    group.setAttribute("class", "node");
    group.setAttribute("data-node", spot.name);
    const terminal = spot.name === "Start" || spot.name === "End";
    const shape = ownerDoc.createElementNS(SVG_NS, terminal ? "circle" : "rect");
    if (terminal) {
      shape.setAttribute("cx", String(spot.x + NODE_W / 2));
      shape.setAttribute("cy", String(spot.y + NODE_H / 2));
      shape.setAttribute("r", String(NODE_H / 2));
    } else {
      shape.setAttribute("x", String(spot.x));
      shape.setAttribute("y", String(spot.y));
      shape.setAttribute("width", String(NODE_W));
      shape.setAttribute("height", String(NODE_H));
      shape.setAttribute("rx", "6");
    }
    group.appendChild(shape);

    const label = ownerDoc.createElementNS(SVG_NS, "text");
    label.setAttribute("x", String(spot.x + NODE_W / 2));
    label.setAttribute("y", String(spot.y + NODE_H / 2 + 4));
    label.setAttribute("text-anchor", "middle");
    label.textContent = spot.name;
    group.appendChild(label);

    const activity = details.get(spot.name);
    if (activity && (activity.split === "and" || activity.split === "xor" || activity.join === "and" || activity.join === "xor")) {
      const note = ownerDoc.createElementNS(SVG_NS, "text");
      note.setAttribute("x", String(spot.x + NODE_W / 2));
      note.setAttribute("y", String(spot.y + NODE_H - 4));
      note.setAttribute("text-anchor", "middle");
      note.setAttribute("class", "gate-note");
      const parts = [];
      if (activity.join === "and" || activity.join === "xor") parts.push(`join:${activity.join}`);
      if (activity.split === "and" || activity.split === "xor") parts.push(`split:${activity.split}`);
      note.textContent = parts.join(" ");
      group.appendChild(note);
    }

    const tokens = tokensOn(spot.name, marking);
    if (tokens > 0) {
      const badge = ownerDoc.createElementNS(SVG_NS, "circle");
      badge.setAttribute("cx", String(spot.x + NODE_W - 6));
      badge.setAttribute("cy", String(spot.y + 6));
      badge.setAttribute("r", "10");
      badge.setAttribute("class", "token-badge");
      badge.setAttribute("data-badge-for", spot.name);
      group.appendChild(badge);
      const count = ownerDoc.createElementNS(SVG_NS, "text");
      count.setAttribute("x", String(spot.x + NODE_W - 6));
      count.setAttribute("y", String(spot.y + 10));
      count.setAttribute("text-anchor", "middle");
      count.setAttribute("class", "token-count");
      count.setAttribute("data-count-for", spot.name);
      count.textContent = String(tokens);
      group.appendChild(count);
    }
    svg.appendChild(group);
  }
  return svg;
}
