import { describe, expect, it } from "vitest";

import {
  applyPreferences,
  applySession,
  canStartGa,
  clearBrush,
  initialState,
  preferenceScoreValid,
  setBrush,
  setColorMode,
  setSlider,
  setWeight,
} from "../src/state.js";
import type { PreferenceRow, SessionDoc } from "../src/types.js";

function sessionDoc(overrides: Partial<SessionDoc> = {}): SessionDoc {
  return {
    id: "abc",
    dataset: "ds.json",
    ae: "ae.npz",
    flow: "flow.npz",
    seed: 0,
    param_space: { names: ["a", "b"], ranges: [[0, 5], [600, 1500]] },
    dims: [8, 8, 8],
    preferences: [],
    runs: [],
    ...overrides,
  };
}

describe("GA gating", () => {
  it("start is disabled with zero preferences", () => {
    const state = applySession(initialState(), sessionDoc());
    expect(canStartGa(state)).toBe(false);
  });

  it("start is enabled once a preference exists and no run is active", () => {
    let state = applySession(initialState(), sessionDoc());
    state = applyPreferences(state, [
      { index: 0, params_raw: [1, 700], params_normalized: [0.2, 0.1], score: 0.5 },
    ]);
    expect(canStartGa(state)).toBe(true);
  });

  it("start is disabled while a run is active", () => {
    const doc = sessionDoc({
      preferences: [{ params_raw: [1, 700], params_normalized: [0.2, 0.1],
                      score: 0.5, latent_mean: [0, 0] }],
      runs: [{ run_id: "run-0", status: "running", generations_done: 2,
               weights: [1, 0, 0], error: null,
               config: { population: 8, generations: 5, mutation_rate: 0.2,
                         mutation_sigma: 0.1, k_nearest: 5, elite_count: 1,
                         uq_samples: 8, seed: 0 } }],
    });
    expect(canStartGa(applySession(initialState(), doc))).toBe(false);
  });
});

describe("preference round-trip", () => {
  it("the table state equals the service payload", () => {
    const rows: PreferenceRow[] = [
      { index: 0, params_raw: [2.5, 900], params_normalized: [0.5, 1 / 3], score: 0.8 },
      { index: 1, params_raw: [0.0, 600], params_normalized: [0.0, 0.0], score: -1.0 },
    ];
    const state = applyPreferences(applySession(initialState(), sessionDoc()), rows);
    expect(state.preferences).toEqual(rows);
  });

  it("session payload preferences are re-indexed rows", () => {
    const doc = sessionDoc({
      preferences: [
        { params_raw: [1, 700], params_normalized: [0.2, 0.1], score: 0.5, latent_mean: [1] },
        { params_raw: [4, 800], params_normalized: [0.8, 0.2], score: -0.25, latent_mean: [2] },
      ],
    });
    const state = applySession(initialState(), doc);
    expect(state.preferences).toEqual([
      { index: 0, params_raw: [1, 700], params_normalized: [0.2, 0.1], score: 0.5 },
      { index: 1, params_raw: [4, 800], params_normalized: [0.8, 0.2], score: -0.25 },
    ]);
  });
});

describe("sliders and weights", () => {
  it("sliders clamp to the declared ranges", () => {
    let state = applySession(initialState(), sessionDoc());
    state = setSlider(state, 0, 99);
    expect(state.sliders[0]).toBe(5);
    state = setSlider(state, 1, -10);
    expect(state.sliders[1]).toBe(600);
  });

  it("sliders initialize at range midpoints", () => {
    const state = applySession(initialState(), sessionDoc());
    expect(state.sliders).toEqual([2.5, 1050]);
  });

  it("weights clamp to [-1, 1]", () => {
    let state = initialState();
    state = setWeight(state, "w1", 3);
    expect(state.weights.w1).toBe(1);
    state = setWeight(state, "w3", -7);
    expect(state.weights.w3).toBe(-1);
  });

  it("preference scores accept only [-1, 1]", () => {
    expect(preferenceScoreValid(1)).toBe(true);
    expect(preferenceScoreValid(-1)).toBe(true);
    expect(preferenceScoreValid(1.1)).toBe(false);
    expect(preferenceScoreValid(Number.NaN)).toBe(false);
  });
});

describe("brush", () => {
  it("clamps to the available generations", () => {
    let state = initialState();
    state = setBrush(state, -3, 99, 6);
    expect(state.brush).toEqual([0, 6]);
  });

  it("orders the endpoints", () => {
    const state = setBrush(initialState(), 5, 2, 6);
    expect(state.brush).toEqual([2, 5]);
  });

  it("clears", () => {
    const state = clearBrush(setBrush(initialState(), 1, 3, 6));
    expect(state.brush).toBeNull();
  });
});

describe("color mode", () => {
  it("accepts only the four documented modes", () => {
    let state = initialState();
    state = setColorMode(state, "diversity");
    expect(state.colorMode).toBe("diversity");
    state = setColorMode(state, "sparkles" as never);
    expect(state.colorMode).toBe("diversity");
  });
});
