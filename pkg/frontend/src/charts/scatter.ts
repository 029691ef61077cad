// Projection-view scatter: 2-D embedded candidates colored by cluster.

import type { RecommendPayload } from "../types.js";
import { clusterColor } from "./colors.js";

const SVG_NS = "http://www.w3.org/2000/svg";

export function renderScatter(
  host: HTMLElement,
  payload: RecommendPayload,
  width: number,
  height: number,
): void {
  host.textContent = "";
  const svg = document.createElementNS(SVG_NS, "svg");
  svg.setAttribute("width", String(width));
  svg.setAttribute("height", String(height));
  host.appendChild(svg);
  const points = payload.projection;
  if (points.length === 0) return;

  let xLo = Infinity;
  let xHi = -Infinity;
  let yLo = Infinity;
  let yHi = -Infinity;
  for (const p of points) {
    xLo = Math.min(xLo, p.x);
    xHi = Math.max(xHi, p.x);
    yLo = Math.min(yLo, p.y);
    yHi = Math.max(yHi, p.y);
  }
  const pad = 14;
  const sx = (x: number) =>
    xHi > xLo ? pad + ((x - xLo) / (xHi - xLo)) * (width - 2 * pad) : width / 2;
  const sy = (y: number) =>
    yHi > yLo ? height - pad - ((y - yLo) / (yHi - yLo)) * (height - 2 * pad) : height / 2;

  for (const p of points) {
    const circle = document.createElementNS(SVG_NS, "circle");
    circle.setAttribute("cx", String(sx(p.x)));
    circle.setAttribute("cy", String(sy(p.y)));
    circle.setAttribute("r", "5");
    circle.setAttribute("fill", clusterColor(p.cluster));
    circle.setAttribute("fill-opacity", "0.85");
    circle.setAttribute("stroke", "#555");
    circle.setAttribute("stroke-width", "0.5");
    const title = document.createElementNS(SVG_NS, "title");
    title.textContent = `candidate ${p.candidate_id} (cluster ${p.cluster})`;
    circle.appendChild(title);
    svg.appendChild(circle);
  }
}
