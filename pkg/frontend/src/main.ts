// Application wiring: one state object, four views, service calls at the
// edges. Views re-render from (state, cached payloads) only.

import { api, ApiFailure, pollRunUntilDone } from "./api.js";
import { drawSlice } from "./charts/heatmap.js";
import { renderLineChart } from "./charts/linechart.js";
import { renderSankey } from "./charts/sankey.js";
import { renderScatter } from "./charts/scatter.js";
import { buildSankey } from "./lineage.js";
import {
  COLOR_MODES,
  RequestGate,
  ViewState,
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
} from "./state.js";
import type { ColorMode } from "./state.js";
import type { PredictPayload, RecommendPayload, RunDoc } from "./types.js";

const SANKEY_W = 640;
const SANKEY_H = 300;

class App {
  state: ViewState = initialState();
  predictPayload: PredictPayload | null = null;
  runDoc: RunDoc | null = null;
  recommendPayload: RecommendPayload | null = null;
  predictGate = new RequestGate();
  polling = false;

  constructor(private root: HTMLElement) {}

  setState(next: ViewState): void {
    this.state = next;
    this.render();
  }

  fail(err: unknown): void {
    const box = this.root.querySelector<HTMLElement>("#errors")!;
    if (err instanceof ApiFailure) {
      box.textContent = `[${err.code}] ${err.message}`;
    } else {
      box.textContent = String(err);
    }
    box.classList.add("visible");
    setTimeout(() => box.classList.remove("visible"), 6000);
  }

  async connect(): Promise<void> {
    const dataset = (this.root.querySelector<HTMLInputElement>("#artifact-dataset"))!.value;
    const ae = (this.root.querySelector<HTMLInputElement>("#artifact-ae"))!.value;
    const flow = (this.root.querySelector<HTMLInputElement>("#artifact-flow"))!.value;
    try {
      const { session_id } = await api.createSession(dataset, ae, flow);
      const doc = await api.getSession(session_id);
      this.setState(applySession(this.state, doc));
      await this.refreshPrediction();
    } catch (err) {
      this.fail(err);
    }
  }

  async refreshSession(): Promise<void> {
    if (!this.state.sessionId) return;
    const doc = await api.getSession(this.state.sessionId);
    this.setState(applySession(this.state, doc));
  }

  async refreshPrediction(): Promise<void> {
    if (!this.state.sessionId) return;
    const token = this.predictGate.next();
    try {
      const payload = await api.predict(
        this.state.sessionId, this.state.sliders, this.state.predictSamples);
      if (!this.predictGate.isCurrent(token)) return; // superseded request
      this.predictPayload = payload;
      this.render();
    } catch (err) {
      if (this.predictGate.isCurrent(token)) this.fail(err);
    }
  }

  async scoreCurrent(score: number): Promise<void> {
    if (!this.state.sessionId || !preferenceScoreValid(score)) return;
    try {
      const { preferences } = await api.addPreference(
        this.state.sessionId, this.state.sliders, score);
      this.setState(applyPreferences(this.state, preferences));
    } catch (err) {
      this.fail(err);
    }
  }

  async startGa(): Promise<void> {
    if (!this.state.sessionId || !canStartGa(this.state)) return;
    const config = {
      population: Number(this.root.querySelector<HTMLInputElement>("#ga-population")!.value),
      generations: Number(this.root.querySelector<HTMLInputElement>("#ga-generations")!.value),
    };
    try {
      const { run_id } = await api.startGa(this.state.sessionId, config, this.state.weights);
      await this.refreshSession();
      this.setState({ ...clearBrush(this.state), selectedRun: run_id });
      this.pollRun(run_id);
    } catch (err) {
      this.fail(err);
    }
  }

  pollRun(runId: string): void {
    if (!this.state.sessionId || this.polling) return;
    this.polling = true;
    pollRunUntilDone(this.state.sessionId, runId, (doc) => {
      this.runDoc = doc;
      this.render();
    }, 500)
      .catch((err) => this.fail(err))
      .finally(() => {
        this.polling = false;
        void this.refreshSession();
      });
  }

  async promote(candidateId: number): Promise<void> {
    if (!this.state.sessionId || !this.state.selectedRun) return;
    const text = window.prompt("Preference score for this candidate (-1 to 1):", "1");
    if (text === null) return;
    const score = Number(text);
    if (!preferenceScoreValid(score)) {
      this.fail(new Error(`score ${text} outside [-1, 1]`));
      return;
    }
    try {
      const { preferences } = await api.promote(
        this.state.sessionId, this.state.selectedRun, candidateId, score);
      this.setState(applyPreferences(this.state, preferences));
    } catch (err) {
      this.fail(err);
    }
  }

  async recommend(): Promise<void> {
    if (!this.state.sessionId || !this.state.selectedRun) return;
    try {
      this.recommendPayload = await api.recommend(
        this.state.sessionId, this.state.selectedRun, this.state.kClusters);
      this.render();
    } catch (err) {
      this.fail(err);
    }
  }

  // --- rendering -------------------------------------------------------

  render(): void {
    this.renderSelectionView();
    this.renderResultView();
    this.renderGaView();
    this.renderProjectionView();
  }

  renderSelectionView(): void {
    const host = this.root.querySelector<HTMLElement>("#sliders")!;
    host.textContent = "";
    const space = this.state.paramSpace;
    if (!space) return;
    space.names.forEach((name, i) => {
      const [lo, hi] = space.ranges[i];
      const row = document.createElement("div");
      row.className = "slider-row";
      const label = document.createElement("label");
      label.textContent = `${name} [${lo}, ${hi}]`;
      const input = document.createElement("input");
      input.type = "range";
      input.min = String(lo);
      input.max = String(hi);
      input.step = String((hi - lo) / 200);
      input.value = String(this.state.sliders[i]);
      input.addEventListener("input", () => {
        this.state = setSlider(this.state, i, Number(input.value));
        value.textContent = this.state.sliders[i].toFixed(4);
      });
      input.addEventListener("change", () => void this.refreshPrediction());
      const value = document.createElement("span");
      value.textContent = this.state.sliders[i].toFixed(4);
      row.append(label, input, value);
      host.appendChild(row);
    });

    const table = this.root.querySelector<HTMLElement>("#preference-table")!;
    table.textContent = "";
    const header = document.createElement("tr");
    header.innerHTML = "<th>#</th><th>parameters</th><th>score</th><th></th>";
    table.appendChild(header);
    this.state.preferences.forEach((pref) => {
      const tr = document.createElement("tr");
      const params = pref.params_raw.map((v) => v.toFixed(3)).join(", ");
      tr.innerHTML = `<td>${pref.index}</td><td>${params}</td><td>${pref.score}</td>`;
      const td = document.createElement("td");
      const btn = document.createElement("button");
      btn.textContent = "remove";
      btn.addEventListener("click", async () => {
        if (!this.state.sessionId) return;
        try {
          const { preferences } = await api.deletePreference(this.state.sessionId, pref.index);
          this.setState(applyPreferences(this.state, preferences));
        } catch (err) {
          this.fail(err);
        }
      });
      td.appendChild(btn);
      tr.appendChild(td);
      table.appendChild(tr);
    });
  }

  renderResultView(): void {
    const meanHost = this.root.querySelector<HTMLElement>("#mean-slices")!;
    const varHost = this.root.querySelector<HTMLElement>("#var-slices")!;
    const stats = this.root.querySelector<HTMLElement>("#prediction-stats")!;
    meanHost.textContent = "";
    varHost.textContent = "";
    const payload = this.predictPayload;
    if (!payload) {
      stats.textContent = "no prediction yet";
      return;
    }
    for (const axis of ["z", "y", "x"] as const) {
      for (const [hostEl, slices, palette, range] of [
        [meanHost, payload.mean_slices, "diverging", payload.value_range],
        [varHost, payload.var_slices, "sequential", undefined],
      ] as const) {
        const cell = document.createElement("div");
        cell.className = "slice-cell";
        const canvas = document.createElement("canvas");
        canvas.width = 132;
        canvas.height = 132;
        drawSlice(canvas, slices[axis], palette, range as [number, number] | undefined);
        const caption = document.createElement("div");
        caption.className = "caption";
        caption.textContent = `${axis}-slice`;
        cell.append(canvas, caption);
        hostEl.appendChild(cell);
      }
    }
    stats.textContent =
      `mean uncertainty ${payload.mean_uncertainty.toExponential(3)} | ` +
      `latent uncertainty ${payload.latent_uncertainty.toExponential(3)} | ` +
      `${payload.n} samples`;
  }

  renderGaView(): void {
    const startBtn = this.root.querySelector<HTMLButtonElement>("#ga-start")!;
    startBtn.disabled = !canStartGa(this.state);
    for (const key of ["w1", "w2", "w3"] as const) {
      const input = this.root.querySelector<HTMLInputElement>(`#weight-${key}`)!;
      input.value = String(this.state.weights[key]);
      this.root.querySelector<HTMLElement>(`#weight-${key}-value`)!.textContent =
        this.state.weights[key].toFixed(2);
    }
    const status = this.root.querySelector<HTMLElement>("#run-status")!;
    const doc = this.runDoc;
    if (!doc) {
      status.textContent = this.state.runs.length === 0 ? "no runs yet" : "";
    } else {
      status.textContent = `${doc.run_id}: ${doc.status}, ` +
        `${doc.generations_done} generations` +
        (doc.error ? ` (${doc.error})` : "");
    }

    const chartHost = this.root.querySelector<HTMLElement>("#fitness-chart")!;
    const sankeyHost = this.root.querySelector<HTMLElement>("#sankey")!;
    if (!doc || doc.generations.length === 0) {
      chartHost.textContent = "";
      sankeyHost.textContent = "";
      return;
    }
    const maxGen = doc.generations[doc.generations.length - 1].index;
    renderLineChart(chartHost, doc.generations, this.state.brush, (lo, hi) => {
      this.setState(setBrush(this.state, lo, hi, maxGen));
    });

    const modeSelect = this.root.querySelector<HTMLSelectElement>("#color-mode")!;
    modeSelect.value = this.state.colorMode;
    const layout = buildSankey(doc.generations, this.state.brush,
      this.state.colorMode, SANKEY_W, SANKEY_H);
    renderSankey(sankeyHost, layout, this.state.hoveredLink, {
      onNodeClick: (id) => void this.promote(id),
      onLinkHover: (link) => {
        this.state = { ...this.state, hoveredLink: link };
        renderSankey(sankeyHost, layout, link, {
          onNodeClick: (id) => void this.promote(id),
          onLinkHover: (l) => this.setState({ ...this.state, hoveredLink: l }),
        }, SANKEY_W, SANKEY_H);
      },
    }, SANKEY_W, SANKEY_H);
  }

  renderProjectionView(): void {
    const host = this.root.querySelector<HTMLElement>("#projection")!;
    const list = this.root.querySelector<HTMLElement>("#recommendations")!;
    const kInput = this.root.querySelector<HTMLInputElement>("#k-clusters")!;
    kInput.value = String(this.state.kClusters);
    const payload = this.recommendPayload;
    if (!payload) {
      host.textContent = "";
      list.textContent = "run the GA, then request recommendations";
      return;
    }
    renderScatter(host, payload, 360, 300);
    list.textContent = "";
    payload.recommendations.forEach((rec, i) => {
      const item = document.createElement("div");
      item.className = "recommendation";
      const params = rec.params_raw.map((v) => v.toFixed(4)).join(", ");
      item.textContent = `#${i + 1} [${params}] (cluster of ${rec.cluster_size})`;
      list.appendChild(item);
    });
  }

  bind(): void {
    this.root.querySelector("#connect")!.addEventListener("click", () => void this.connect());
    this.root.querySelector("#score-add")!.addEventListener("click", () => {
      const score = Number(this.root.querySelector<HTMLInputElement>("#score-input")!.value);
      void this.scoreCurrent(score);
    });
    this.root.querySelector("#ga-start")!.addEventListener("click", () => void this.startGa());
    for (const key of ["w1", "w2", "w3"] as const) {
      const input = this.root.querySelector<HTMLInputElement>(`#weight-${key}`)!;
      input.addEventListener("input", () => {
        this.setState(setWeight(this.state, key, Number(input.value)));
      });
    }
    const modeSelect = this.root.querySelector<HTMLSelectElement>("#color-mode")!;
    for (const mode of COLOR_MODES) {
      const option = document.createElement("option");
      option.value = mode;
      option.textContent = mode;
      modeSelect.appendChild(option);
    }
    modeSelect.addEventListener("change", () => {
      this.setState(setColorMode(this.state, modeSelect.value as ColorMode));
    });
    this.root.querySelector("#brush-clear")!.addEventListener("click", () => {
      this.setState(clearBrush(this.state));
    });
    const kInput = this.root.querySelector<HTMLInputElement>("#k-clusters")!;
    kInput.addEventListener("change", () => {
      this.setState({ ...this.state, kClusters: Math.max(1, Number(kInput.value)) });
    });
    this.root.querySelector("#recommend")!.addEventListener("click", () => void this.recommend());
  }
}

const root = document.getElementById("app");
if (root) {
  const app = new App(root);
  app.bind();
  app.render();
}

export { App };
