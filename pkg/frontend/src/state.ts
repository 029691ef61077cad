// View state and the pure update/derivation functions the views render from.
// Everything here is a plain function of (state, payloads): no DOM, no fetch.

import type { ParamSpace, PreferenceRow, RunSummary, SessionDoc } from "./types.js";

export type ColorMode = "fitness" | "similarity" | "diversity" | "uncertainty";

export const COLOR_MODES: ColorMode[] = ["fitness", "similarity", "diversity", "uncertainty"];

export interface Weights {
  w1: number;
  w2: number;
  w3: number;
}

export interface ViewState {
  sessionId: string | null;
  paramSpace: ParamSpace | null;
  sliders: number[]; // raw parameter values, clamped to declared ranges
  preferences: PreferenceRow[];
  weights: Weights;
  runs: RunSummary[];
  selectedRun: string | null;
  brush: [number, number] | null; // inclusive generation range
  colorMode: ColorMode;
  hoveredLink: { parent: number; child: number } | null;
  kClusters: number;
  predictSamples: number;
}

export function initialState(): ViewState {
  return {
    sessionId: null,
    paramSpace: null,
    sliders: [],
    preferences: [],
    weights: { w1: 0.8, w2: 0.6, w3: -0.8 },
    runs: [],
    selectedRun: null,
    brush: null,
    colorMode: "fitness",
    hoveredLink: null,
    kClusters: 3,
    predictSamples: 20,
  };
}

export function clamp(value: number, lo: number, hi: number): number {
  return Math.min(hi, Math.max(lo, value));
}

export function applySession(state: ViewState, doc: SessionDoc): ViewState {
  const mids = doc.param_space.ranges.map(([lo, hi]) => lo + 0.5 * (hi - lo));
  const sliders = state.sliders.length === mids.length
    ? state.sliders.map((v, i) => clamp(v, doc.param_space.ranges[i][0], doc.param_space.ranges[i][1]))
    : mids;
  return {
    ...state,
    sessionId: doc.id,
    paramSpace: doc.param_space,
    sliders,
    preferences: doc.preferences.map((p, index) => ({
      index,
      params_raw: p.params_raw,
      params_normalized: p.params_normalized,
      score: p.score,
    })),
    runs: doc.runs,
  };
}

export function applyPreferences(state: ViewState, rows: PreferenceRow[]): ViewState {
  return { ...state, preferences: rows };
}

export function setSlider(state: ViewState, index: number, value: number): ViewState {
  if (!state.paramSpace) return state;
  const [lo, hi] = state.paramSpace.ranges[index];
  const sliders = state.sliders.slice();
  sliders[index] = clamp(value, lo, hi);
  return { ...state, sliders };
}

export function setWeight(state: ViewState, key: keyof Weights, value: number): ViewState {
  return { ...state, weights: { ...state.weights, [key]: clamp(value, -1, 1) } };
}

export function setColorMode(state: ViewState, mode: ColorMode): ViewState {
  return COLOR_MODES.includes(mode) ? { ...state, colorMode: mode } : state;
}

/** The GA can start only with at least one preference and no active run. */
export function canStartGa(state: ViewState): boolean {
  if (state.preferences.length === 0) return false;
  return !state.runs.some((r) => r.status === "running");
}

/** Clamp a requested brush range to the generations that actually exist. */
export function setBrush(
  state: ViewState,
  lo: number,
  hi: number,
  maxGeneration: number,
): ViewState {
  if (maxGeneration < 0) return { ...state, brush: null };
  const a = Math.round(clamp(Math.min(lo, hi), 0, maxGeneration));
  const b = Math.round(clamp(Math.max(lo, hi), 0, maxGeneration));
  return { ...state, brush: [a, b] };
}

export function clearBrush(state: ViewState): ViewState {
  return { ...state, brush: null };
}

export function preferenceScoreValid(score: number): boolean {
  return Number.isFinite(score) && score >= -1 && score <= 1;
}

/**
 * Stale-response guard: each view keeps a request generation counter; a
 * response is applied only when no newer request has been issued since.
 */
export class RequestGate {
  private counter = 0;

  next(): number {
    this.counter += 1;
    return this.counter;
  }

  isCurrent(token: number): boolean {
    return token === this.counter;
  }
}
