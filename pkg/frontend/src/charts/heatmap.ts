// Canvas heatmap for a row-major 2-D slice.

import type { SlicePayload } from "../types.js";
import { divergingColor, normalizeValues, sequentialColor } from "./colors.js";

export function drawSlice(
  canvas: HTMLCanvasElement,
  slice: SlicePayload,
  palette: "diverging" | "sequential",
  range?: [number, number],
): void {
  const [rows, cols] = slice.dims;
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const cellW = canvas.width / cols;
  const cellH = canvas.height / rows;
  let ts: number[];
  if (range && range[1] > range[0]) {
    ts = slice.values.map((v) => (v - range[0]) / (range[1] - range[0]));
  } else {
    ts = normalizeValues(slice.values);
  }
  const colorOf = palette === "diverging" ? divergingColor : sequentialColor;
  for (let i = 0; i < rows; i++) {
    for (let j = 0; j < cols; j++) {
      ctx.fillStyle = colorOf(ts[i * cols + j]);
      ctx.fillRect(j * cellW, (rows - 1 - i) * cellH, Math.ceil(cellW), Math.ceil(cellH));
    }
  }
}
