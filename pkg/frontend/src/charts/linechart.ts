// SVG line chart of per-generation fitness with a horizontal brush.
// Geometry helpers are pure; `renderLineChart` owns the DOM.

import type { GenerationDoc } from "../types.js";

const SVG_NS = "http://www.w3.org/2000/svg";

export interface ChartGeometry {
  width: number;
  height: number;
  padLeft: number;
  padBottom: number;
  padTop: number;
}

export const DEFAULT_GEOMETRY: ChartGeometry = {
  width: 460,
  height: 180,
  padLeft: 44,
  padBottom: 24,
  padTop: 8,
};

export interface ChartScales {
  xOf(generation: number): number;
  generationOf(x: number): number;
  yOf(value: number): number;
}

export function chartScales(generations: GenerationDoc[], geom: ChartGeometry): ChartScales {
  const maxGen = Math.max(1, generations.length - 1);
  let lo = Infinity;
  let hi = -Infinity;
  for (const g of generations) {
    lo = Math.min(lo, g.mean_fitness, g.max_fitness);
    hi = Math.max(hi, g.mean_fitness, g.max_fitness);
  }
  if (!Number.isFinite(lo)) {
    lo = 0;
    hi = 1;
  }
  if (hi - lo < 1e-12) hi = lo + 1;
  const plotW = geom.width - geom.padLeft - 8;
  const plotH = geom.height - geom.padBottom - geom.padTop;
  return {
    xOf: (gen) => geom.padLeft + (gen / maxGen) * plotW,
    generationOf: (x) => ((x - geom.padLeft) / plotW) * maxGen,
    yOf: (v) => geom.padTop + (1 - (v - lo) / (hi - lo)) * plotH,
  };
}

export function polylinePoints(
  generations: GenerationDoc[],
  series: "mean_fitness" | "max_fitness",
  scales: ChartScales,
): string {
  return generations
    .map((g) => `${scales.xOf(g.index).toFixed(1)},${scales.yOf(g[series]).toFixed(1)}`)
    .join(" ");
}

export function renderLineChart(
  host: HTMLElement,
  generations: GenerationDoc[],
  brush: [number, number] | null,
  onBrush: (lo: number, hi: number) => void,
  geom: ChartGeometry = DEFAULT_GEOMETRY,
): void {
  host.textContent = "";
  const svg = document.createElementNS(SVG_NS, "svg");
  svg.setAttribute("width", String(geom.width));
  svg.setAttribute("height", String(geom.height));
  svg.setAttribute("class", "fitness-chart");
  host.appendChild(svg);
  if (generations.length === 0) return;

  const scales = chartScales(generations, geom);

  const axis = document.createElementNS(SVG_NS, "line");
  axis.setAttribute("x1", String(geom.padLeft));
  axis.setAttribute("x2", String(geom.width - 8));
  axis.setAttribute("y1", String(geom.height - geom.padBottom));
  axis.setAttribute("y2", String(geom.height - geom.padBottom));
  axis.setAttribute("stroke", "#999");
  svg.appendChild(axis);

  for (const g of generations) {
    const label = document.createElementNS(SVG_NS, "text");
    label.setAttribute("x", String(scales.xOf(g.index)));
    label.setAttribute("y", String(geom.height - 8));
    label.setAttribute("text-anchor", "middle");
    label.setAttribute("font-size", "9");
    label.setAttribute("fill", "#666");
    label.textContent = String(g.index);
    svg.appendChild(label);
  }

  if (brush) {
    const rect = document.createElementNS(SVG_NS, "rect");
    const x0 = scales.xOf(brush[0]);
    const x1 = scales.xOf(brush[1]);
    rect.setAttribute("x", String(Math.min(x0, x1)));
    rect.setAttribute("y", String(geom.padTop));
    rect.setAttribute("width", String(Math.abs(x1 - x0)));
    rect.setAttribute("height", String(geom.height - geom.padTop - geom.padBottom));
    rect.setAttribute("fill", "rgba(120,160,220,0.25)");
    svg.appendChild(rect);
  }

  const meanLine = document.createElementNS(SVG_NS, "polyline");
  meanLine.setAttribute("points", polylinePoints(generations, "mean_fitness", scales));
  meanLine.setAttribute("fill", "none");
  meanLine.setAttribute("stroke", "#4c78a8");
  meanLine.setAttribute("stroke-width", "2");
  svg.appendChild(meanLine);

  const maxLine = document.createElementNS(SVG_NS, "polyline");
  maxLine.setAttribute("points", polylinePoints(generations, "max_fitness", scales));
  maxLine.setAttribute("fill", "none");
  maxLine.setAttribute("stroke", "#e45756");
  maxLine.setAttribute("stroke-width", "1.5");
  maxLine.setAttribute("stroke-dasharray", "4 3");
  svg.appendChild(maxLine);

  let dragStart: number | null = null;
  svg.addEventListener("pointerdown", (ev) => {
    dragStart = scales.generationOf(ev.offsetX);
    svg.setPointerCapture(ev.pointerId);
  });
  svg.addEventListener("pointerup", (ev) => {
    if (dragStart === null) return;
    const end = scales.generationOf(ev.offsetX);
    onBrush(dragStart, end);
    dragStart = null;
  });
}
