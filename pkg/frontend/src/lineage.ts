// Pure lineage geometry: brush filtering, sankey layout, and hover-path
// tracing. The layout is a deterministic function of (generations, brush,
// color mode, pixel box), which is what the contract tests pin down.

import type { CandidateDoc, GenerationDoc } from "./types.js";
import type { ColorMode } from "./state.js";

export interface SankeyNode {
  id: number;
  generation: number;
  column: number;
  candidate: CandidateDoc;
  x: number;
  y: number;
  width: number;
  height: number;
  colorValue: number; // normalized 0..1 within the brushed range
  offspring: number;
}

export interface SankeyLink {
  parent: number;
  child: number;
  x0: number;
  y0: number;
  x1: number;
  y1: number;
  thickness: number;
}

export interface SankeyLayout {
  columns: number[]; // generation indices, one per rendered column
  nodes: SankeyNode[];
  links: SankeyLink[];
}

export const NODE_WIDTH = 14;
export const NODE_GAP = 4;

export function brushedGenerations(
  generations: GenerationDoc[],
  brush: [number, number] | null,
): GenerationDoc[] {
  if (generations.length === 0) return [];
  const maxIndex = generations[generations.length - 1].index;
  const [lo, hi] = brush ?? [0, maxIndex];
  return generations.filter((g) => g.index >= lo && g.index <= hi);
}

export function colorValue(candidate: CandidateDoc, mode: ColorMode): number {
  switch (mode) {
    case "fitness":
      return candidate.fitness;
    case "similarity":
      return candidate.sim;
    case "diversity":
      return candidate.div;
    case "uncertainty":
      return candidate.unc;
  }
}

/** Number of next-generation candidates listing this candidate as a parent. */
export function offspringCounts(generations: GenerationDoc[]): Map<number, number> {
  const counts = new Map<number, number>();
  for (const gen of generations) {
    for (const cand of gen.candidates) {
      if (!counts.has(cand.id)) counts.set(cand.id, 0);
      for (const parent of cand.parent_ids) {
        counts.set(parent, (counts.get(parent) ?? 0) + 1);
      }
    }
  }
  return counts;
}

export function buildSankey(
  generations: GenerationDoc[],
  brush: [number, number] | null,
  mode: ColorMode,
  width: number,
  height: number,
): SankeyLayout {
  const gens = brushedGenerations(generations, brush);
  if (gens.length === 0) return { columns: [], nodes: [], links: [] };

  const offspring = offspringCounts(generations);
  let lo = Infinity;
  let hi = -Infinity;
  for (const gen of gens) {
    for (const cand of gen.candidates) {
      const v = colorValue(cand, mode);
      lo = Math.min(lo, v);
      hi = Math.max(hi, v);
    }
  }
  const span = hi - lo;

  const columns = gens.map((g) => g.index);
  const columnGap = gens.length > 1 ? (width - NODE_WIDTH) / (gens.length - 1) : 0;
  const nodes: SankeyNode[] = [];
  const byId = new Map<number, SankeyNode>();

  gens.forEach((gen, column) => {
    // node height proportional to offspring count + 1
    const unitWeights = gen.candidates.map((c) => (offspring.get(c.id) ?? 0) + 1);
    const totalUnits = unitWeights.reduce((a, b) => a + b, 0);
    const free = Math.max(0, height - NODE_GAP * (gen.candidates.length - 1));
    let y = 0;
    gen.candidates.forEach((cand, i) => {
      const h = totalUnits > 0 ? (unitWeights[i] / totalUnits) * free : 0;
      const node: SankeyNode = {
        id: cand.id,
        generation: gen.index,
        column,
        candidate: cand,
        x: column * columnGap,
        y,
        width: NODE_WIDTH,
        height: h,
        colorValue: span > 0 ? (colorValue(cand, mode) - lo) / span : 0.5,
        offspring: offspring.get(cand.id) ?? 0,
      };
      nodes.push(node);
      byId.set(cand.id, node);
      y += h + NODE_GAP;
    });
  });

  // links exist exactly for parent ids recorded in the lineage whose parent
  // node sits in the previous rendered column
  const links: SankeyLink[] = [];
  for (const node of nodes) {
    if (node.column === 0) continue;
    for (const parentId of node.candidate.parent_ids) {
      const parent = byId.get(parentId);
      if (parent === undefined || parent.column !== node.column - 1) continue;
      links.push({
        parent: parentId,
        child: node.id,
        x0: parent.x + NODE_WIDTH,
        y0: parent.y + parent.height / 2,
        x1: node.x,
        y1: node.y + node.height / 2,
        thickness: Math.max(1, Math.min(parent.height, node.height) / 3),
      });
    }
  }
  return { columns, nodes, links };
}

export function linkKey(parent: number, child: number): string {
  return `${parent}->${child}`;
}

/**
 * Hovering a link highlights the full chain through it: the parent's
 * ancestors back to the first brushed column and the child's descendants
 * forward to the last one.
 */
export function tracePath(
  layout: SankeyLayout,
  link: { parent: number; child: number },
): { nodes: Set<number>; links: Set<string> } {
  const nodes = new Set<number>();
  const links = new Set<string>();
  const parentsOf = new Map<number, number[]>();
  const childrenOf = new Map<number, number[]>();
  for (const l of layout.links) {
    if (!parentsOf.has(l.child)) parentsOf.set(l.child, []);
    parentsOf.get(l.child)!.push(l.parent);
    if (!childrenOf.has(l.parent)) childrenOf.set(l.parent, []);
    childrenOf.get(l.parent)!.push(l.child);
  }

  links.add(linkKey(link.parent, link.child));
  const up = [link.parent];
  while (up.length > 0) {
    const id = up.pop()!;
    if (nodes.has(id)) continue;
    nodes.add(id);
    for (const parent of parentsOf.get(id) ?? []) {
      links.add(linkKey(parent, id));
      up.push(parent);
    }
  }
  const down = [link.child];
  while (down.length > 0) {
    const id = down.pop()!;
    if (nodes.has(id)) continue;
    nodes.add(id);
    for (const child of childrenOf.get(id) ?? []) {
      links.add(linkKey(id, child));
      down.push(child);
    }
  }
  return { nodes, links };
}
