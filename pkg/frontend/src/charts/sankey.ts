// SVG renderer for the lineage sankey. Layout comes from lineage.ts; this
// file only maps it onto DOM nodes and events.

import type { SankeyLayout, SankeyLink } from "../lineage.js";
import { linkKey, tracePath } from "../lineage.js";
import { divergingColor } from "./colors.js";

const SVG_NS = "http://www.w3.org/2000/svg";

export interface SankeyCallbacks {
  onNodeClick(candidateId: number): void;
  onLinkHover(link: { parent: number; child: number } | null): void;
}

function linkPath(link: SankeyLink): string {
  const mx = (link.x0 + link.x1) / 2;
  return `M ${link.x0} ${link.y0} C ${mx} ${link.y0}, ${mx} ${link.y1}, ${link.x1} ${link.y1}`;
}

export function renderSankey(
  host: HTMLElement,
  layout: SankeyLayout,
  hovered: { parent: number; child: number } | null,
  callbacks: SankeyCallbacks,
  width: number,
  height: number,
): void {
  host.textContent = "";
  const svg = document.createElementNS(SVG_NS, "svg");
  svg.setAttribute("width", String(width));
  svg.setAttribute("height", String(height));
  svg.setAttribute("class", "sankey");
  host.appendChild(svg);

  const highlight = hovered ? tracePath(layout, hovered) : null;

  for (const link of layout.links) {
    const path = document.createElementNS(SVG_NS, "path");
    path.setAttribute("d", linkPath(link));
    path.setAttribute("fill", "none");
    path.setAttribute("stroke-width", String(link.thickness));
    const lit = highlight?.links.has(linkKey(link.parent, link.child)) ?? false;
    path.setAttribute("stroke", lit ? "#7b4fb3" : "rgba(150,150,150,0.45)");
    if (lit) path.setAttribute("stroke-width", String(link.thickness + 1.5));
    path.addEventListener("pointerenter", () =>
      callbacks.onLinkHover({ parent: link.parent, child: link.child }));
    path.addEventListener("pointerleave", () => callbacks.onLinkHover(null));
    svg.appendChild(path);
  }

  for (const node of layout.nodes) {
    const rect = document.createElementNS(SVG_NS, "rect");
    rect.setAttribute("x", String(node.x));
    rect.setAttribute("y", String(node.y));
    rect.setAttribute("width", String(node.width));
    rect.setAttribute("height", String(Math.max(1, node.height)));
    rect.setAttribute("fill", divergingColor(node.colorValue));
    const lit = highlight?.nodes.has(node.id) ?? false;
    rect.setAttribute("stroke", lit ? "#7b4fb3" : (node.candidate.elite ? "#333" : "#888"));
    rect.setAttribute("stroke-width", lit ? "2" : "0.6");
    rect.setAttribute("class", "sankey-node");
    const title = document.createElementNS(SVG_NS, "title");
    title.textContent =
      `candidate ${node.id} (gen ${node.generation})\n` +
      `fitness ${node.candidate.fitness.toFixed(4)}\n` +
      `sim ${node.candidate.sim.toFixed(4)} div ${node.candidate.div.toFixed(4)} ` +
      `unc ${node.candidate.unc.toFixed(6)}\noffspring ${node.offspring}` +
      (node.candidate.elite ? "\nelite" : "");
    rect.appendChild(title);
    rect.addEventListener("click", () => callbacks.onNodeClick(node.id));
    svg.appendChild(rect);
  }
}
