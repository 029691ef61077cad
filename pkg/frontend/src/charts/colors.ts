// Diverging blue-white-red colormap for slice heatmaps and sankey nodes,
// plus a categorical palette for cluster labels.

export function divergingColor(t: number): string {
  const x = Math.min(1, Math.max(0, t));
  // piecewise-linear blue (0) -> white (0.5) -> red (1)
  let r: number;
  let g: number;
  let b: number;
  if (x < 0.5) {
    const u = x / 0.5;
    r = 59 + u * (255 - 59);
    g = 76 + u * (255 - 76);
    b = 192 + u * (255 - 192);
  } else {
    const u = (x - 0.5) / 0.5;
    r = 255 - u * (255 - 180);
    g = 255 - u * (255 - 4);
    b = 255 - u * (255 - 38);
  }
  return `rgb(${Math.round(r)},${Math.round(g)},${Math.round(b)})`;
}

export function sequentialColor(t: number): string {
  const x = Math.min(1, Math.max(0, t));
  const r = Math.round(255 * Math.min(1, 0.1 + 1.2 * x));
  const g = Math.round(255 * (0.95 - 0.75 * x));
  const b = Math.round(255 * (0.35 - 0.3 * x));
  return `rgb(${r},${g},${b})`;
}

const CLUSTER_PALETTE = [
  "#4c78a8", "#f58518", "#54a24b", "#e45756", "#72b7b2",
  "#eeca3b", "#b279a2", "#ff9da6", "#9d755d", "#bab0ac",
];

export function clusterColor(label: number): string {
  return CLUSTER_PALETTE[((label % CLUSTER_PALETTE.length) + CLUSTER_PALETTE.length) % CLUSTER_PALETTE.length];
}

/** Normalize values to 0..1; constant arrays map to 0.5. */
export function normalizeValues(values: number[]): number[] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    lo = Math.min(lo, v);
    hi = Math.max(hi, v);
  }
  const span = hi - lo;
  return values.map((v) => (span > 0 ? (v - lo) / span : 0.5));
}
