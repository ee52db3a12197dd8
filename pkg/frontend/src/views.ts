// The four dashboard sections. Each render function owns one tab panel
// and talks to the service only through api.ts.

import {
  AlgorithmInfo,
  ApiError,
  RunInfo,
  createRun,
  fetchGraphCsv,
  fetchReportPage,
  fetchSummary,
  getRun,
  listAlgorithms,
  listRuns,
  listScenarios,
  uploadScenario,
} from "./api.js";
import {
  chartMax,
  nextOffset,
  parseGraphCsv,
  parseReportJsonl,
  prevOffset,
  seriesPolyline,
} from "./parse.js";

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

function errorsOf(e: unknown): string[] {
  if (e instanceof ApiError) return e.errors;
  return [String(e)];
}

// ---- Traffic Data -------------------------------------------------------

export async function renderTraffic(root: HTMLElement): Promise<void> {
  root.innerHTML = `
    <h2>Traffic Data</h2>
    <form id="upload-form">
      <input type="file" id="trace-file" accept=".xml,.csv" required>
      <input type="text" id="trace-name" placeholder="scenario name">
      <button type="submit">Upload</button>
    </form>
    <div id="upload-error" class="error"></div>
    <div id="scenario-list"></div>`;
  const form = root.querySelector("#upload-form") as HTMLFormElement;
  form.addEventListener("submit", async (ev) => {
    ev.preventDefault();
    const fileInput = root.querySelector("#trace-file") as HTMLInputElement;
    const nameInput = root.querySelector("#trace-name") as HTMLInputElement;
    const file = fileInput.files?.[0];
    if (!file) return;
    const name = nameInput.value || file.name.replace(/\.(xml|csv)$/i, "");
    const ctype = file.name.toLowerCase().endsWith(".xml") ? "application/xml" : "text/csv";
    const errBox = root.querySelector("#upload-error") as HTMLElement;
    errBox.textContent = "";
    try {
      await uploadScenario(name, file, ctype);
      form.reset();
      await refreshScenarioList(root);
    } catch (e) {
      errBox.textContent = errorsOf(e).join("; ");
    }
  });
  await refreshScenarioList(root);
}

async function refreshScenarioList(root: HTMLElement): Promise<void> {
  const box = root.querySelector("#scenario-list") as HTMLElement;
  const scenarios = await listScenarios();
  if (scenarios.length === 0) {
    box.innerHTML = `<p class="empty">No scenarios yet. Upload an FCD XML or CSV trace.</p>`;
    return;
  }
  const rows = scenarios
    .map(
      (s) => `<tr>
        <td>${esc(s.name)}</td>
        <td>${s.n_timesteps}</td>
        <td>${s.n_vehicles}</td>
        <td>${s.warnings.map(esc).join("<br>") || "—"}</td>
      </tr>`,
    )
    .join("");
  box.innerHTML = `<table>
    <thead><tr><th>Name</th><th>Timesteps</th><th>Vehicles</th><th>Warnings</th></tr></thead>
    <tbody>${rows}</tbody></table>`;
}

// ---- Clustering Algorithm -----------------------------------------------

export interface RunSelection {
  onRunChosen: (runId: string) => void;
}

let pollTimer: number | undefined;

export async function renderAlgorithm(root: HTMLElement, sel: RunSelection): Promise<void> {
  const [algorithms, scenarios, runs] = await Promise.all([
    listAlgorithms(),
    listScenarios(),
    listRuns(),
  ]);
  root.innerHTML = `
    <h2>Clustering Algorithm</h2>
    <form id="run-form">
      <label>Scenario
        <select id="run-scenario" required>
          ${scenarios.map((s) => `<option value="${s.id}">${esc(s.name)}</option>`).join("")}
        </select>
      </label>
      <label>Algorithm
        <select id="run-algorithm">
          ${algorithms.map((a) => `<option value="${a.id}">${esc(a.label)}</option>`).join("")}
        </select>
      </label>
      <label>Transmission range [m]
        <input type="number" id="run-range" min="1" step="any" required>
      </label>
      <span id="algo-params"></span>
      <button type="submit" ${scenarios.length === 0 ? "disabled" : ""}>Start run</button>
    </form>
    <div id="run-error" class="error"></div>
    <div id="run-status"></div>
    <div id="run-list"></div>`;

  const algoSelect = root.querySelector("#run-algorithm") as HTMLSelectElement;
  const renderParams = () => {
    const algo = algorithms.find((a) => a.id === algoSelect.value);
    const box = root.querySelector("#algo-params") as HTMLElement;
    box.innerHTML = paramInputsHtml(algo);
  };
  algoSelect.addEventListener("change", renderParams);
  renderParams();

  const form = root.querySelector("#run-form") as HTMLFormElement;
  form.addEventListener("submit", async (ev) => {
    ev.preventDefault();
    const errBox = root.querySelector("#run-error") as HTMLElement;
    errBox.textContent = "";
    const algo = algorithms.find((a) => a.id === algoSelect.value)!;
    const params: Record<string, number> = {};
    for (const p of algo.params) {
      const input = root.querySelector(`#param-${p.name}`) as HTMLInputElement;
      params[p.name] = Number(input.value);
    }
    const rangeM = Number((root.querySelector("#run-range") as HTMLInputElement).value);
    const scenarioId = (root.querySelector("#run-scenario") as HTMLSelectElement).value;
    try {
      const run = await createRun(scenarioId, algo.id, rangeM, params);
      sel.onRunChosen(run.id);
      trackRun(root, run.id);
    } catch (e) {
      errBox.textContent = errorsOf(e).join("; ");
    }
  });

  renderRunList(root, runs, sel);
}

export function paramInputsHtml(algo: AlgorithmInfo | undefined): string {
  if (!algo || algo.params.length === 0) return "";
  return algo.params
    .map(
      (p) => `<label>${esc(p.name)}
        <input type="number" id="param-${p.name}" step="any" value="${p.default}">
      </label>`,
    )
    .join("");
}

export function statusChipHtml(run: RunInfo): string {
  const pct = Math.round(run.progress * 100);
  const detail =
    run.status === "running" ? ` ${pct}%` : run.status === "failed" ? `: ${esc(run.error)}` : "";
  return `<span class="chip chip-${run.status}">${run.status}${detail}</span>`;
}

function trackRun(root: HTMLElement, runId: string): void {
  if (pollTimer !== undefined) window.clearTimeout(pollTimer);
  const box = root.querySelector("#run-status") as HTMLElement;
  const poll = async () => {
    let run: RunInfo;
    try {
      run = await getRun(runId);
    } catch (e) {
      box.innerHTML = `<span class="error">${esc(errorsOf(e).join("; "))}</span>`;
      return;
    }
    box.innerHTML = `Run <code>${runId.slice(0, 8)}</code> ${statusChipHtml(run)}`;
    if (run.status === "queued" || run.status === "running") {
      pollTimer = window.setTimeout(poll, 1000);
    }
  };
  void poll();
}

function renderRunList(root: HTMLElement, runs: RunInfo[], sel: RunSelection): void {
  const box = root.querySelector("#run-list") as HTMLElement;
  if (runs.length === 0) {
    box.innerHTML = `<p class="empty">No runs yet.</p>`;
    return;
  }
  const rows = runs
    .map((r) => {
      const cluster = r.config.cluster as { algorithm?: string; range_m?: number };
      return `<tr data-run="${r.id}">
        <td><code>${r.id.slice(0, 8)}</code></td>
        <td>${esc(String(cluster.algorithm ?? ""))}</td>
        <td>${cluster.range_m ?? ""}</td>
        <td>${statusChipHtml(r)}</td>
        <td><button class="pick-run" data-run="${r.id}">view</button></td>
      </tr>`;
    })
    .join("");
  box.innerHTML = `<table>
    <thead><tr><th>Run</th><th>Algorithm</th><th>R [m]</th><th>Status</th><th></th></tr></thead>
    <tbody>${rows}</tbody></table>`;
  box.querySelectorAll("button.pick-run").forEach((btn) => {
    btn.addEventListener("click", () => {
      const id = (btn as HTMLElement).dataset.run!;
      sel.onRunChosen(id);
      trackRun(root, id);
    });
  });
}

// ---- Report -------------------------------------------------------------

const PAGE_SIZE = 50;

export async function renderReport(root: HTMLElement, runId: string | null, offset = 0): Promise<void> {
  if (!runId) {
    root.innerHTML = `<h2>Report</h2><p class="empty">Pick a run in the Clustering Algorithm tab.</p>`;
    return;
  }
  root.innerHTML = `<h2>Report</h2><p>loading…</p>`;
  let text: string;
  try {
    text = await fetchReportPage(runId, offset, PAGE_SIZE);
  } catch (e) {
    const msg = e instanceof ApiError && e.status === 409 ? "run in progress" : errorsOf(e).join("; ");
    root.innerHTML = `<h2>Report</h2><p class="error">${esc(msg)}</p>`;
    return;
  }
  const rows = parseReportJsonl(text);
  const body = rows
    .map(
      (r) => `<tr>
        <td>${r.t}</td><td>${esc(r.veh)}</td><td>${r.x}</td><td>${r.y}</td>
        <td>${r.speed}</td><td>${r.angle}</td><td>${r.degree}</td>
        <td><span class="role role-${r.role}">${r.role}</span></td>
        <td>${r.cluster === null ? "—" : esc(r.cluster)}</td>
        <td>${r.dist_ch === null ? "—" : r.dist_ch}</td>
      </tr>`,
    )
    .join("");
  const prev = prevOffset(offset, PAGE_SIZE);
  const next = nextOffset(offset, PAGE_SIZE, rows.length);
  root.innerHTML = `
    <h2>Report</h2>
    <table>
      <thead><tr><th>t</th><th>vehicle</th><th>x</th><th>y</th><th>speed</th>
        <th>angle</th><th>degree</th><th>role</th><th>cluster</th><th>dist CH</th></tr></thead>
      <tbody>${body}</tbody>
    </table>
    <div class="pager">
      <button id="page-prev" ${prev === null ? "disabled" : ""}>previous</button>
      <span>records ${offset}–${offset + rows.length}</span>
      <button id="page-next" ${next === null ? "disabled" : ""}>next</button>
    </div>`;
  root.querySelector("#page-prev")?.addEventListener("click", () => {
    if (prev !== null) void renderReport(root, runId, prev);
  });
  root.querySelector("#page-next")?.addEventListener("click", () => {
    if (next !== null) void renderReport(root, runId, next);
  });
}

// ---- Graph Data ---------------------------------------------------------

const CHART_W = 640;
const CHART_H = 240;

const SUMMARY_CARDS: [keyof import("./api.js").Summary, string][] = [
  ["avg_ch_duration_s", "avg CH duration [s]"],
  ["avg_cm_duration_s", "avg CM duration [s]"],
  ["avg_ch_changes_per_vehicle", "avg CH changes / vehicle"],
  ["avg_num_clusters", "avg clusters"],
  ["avg_num_cm", "avg CMs"],
  ["avg_num_unclustered", "avg unclustered"],
];

export async function renderGraph(root: HTMLElement, runId: string | null): Promise<void> {
  if (!runId) {
    root.innerHTML = `<h2>Graph Data</h2><p class="empty">Pick a run in the Clustering Algorithm tab.</p>`;
    return;
  }
  root.innerHTML = `<h2>Graph Data</h2><p>loading…</p>`;
  let summary: import("./api.js").Summary;
  let csv: string;
  try {
    [summary, csv] = await Promise.all([fetchSummary(runId), fetchGraphCsv(runId)]);
  } catch (e) {
    const msg = e instanceof ApiError && e.status === 409 ? "run in progress" : errorsOf(e).join("; ");
    root.innerHTML = `<h2>Graph Data</h2><p class="error">${esc(msg)}</p>`;
    return;
  }
  const series = parseGraphCsv(csv);
  const cards = SUMMARY_CARDS.map(
    ([key, label]) => `<div class="card"><div class="card-value">${summary[key]}</div>
      <div class="card-label">${label}</div></div>`,
  ).join("");
  root.innerHTML = `<h2>Graph Data</h2><div class="cards">${cards}</div><div id="chart"></div>`;
  const chart = root.querySelector("#chart") as HTMLElement;
  if (series.length === 0) {
    chart.innerHTML = `<p class="empty">no data</p>`;
    return;
  }
  const ts = series.map((p) => p.t);
  const max = chartMax(series);
  const lines: [string, (p: (typeof series)[number]) => number][] = [
    ["clusters", (p) => p.n_clusters],
    ["cm", (p) => p.n_cm],
    ["unclustered", (p) => p.n_unclustered],
  ];
  const polys = lines
    .map(
      ([cls, pick]) =>
        `<polyline class="line line-${cls}" fill="none"
           points="${seriesPolyline(ts, series.map(pick), CHART_W, CHART_H, max)}"/>`,
    )
    .join("");
  chart.innerHTML = `
    <svg viewBox="0 0 ${CHART_W} ${CHART_H}" preserveAspectRatio="none">${polys}</svg>
    <div class="legend">
      <span class="line-clusters">clusters</span>
      <span class="line-cm">cluster members</span>
      <span class="line-unclustered">unclustered</span>
      <span>t ${ts[0]} … ${ts[ts.length - 1]}, max ${max}</span>
    </div>`;
}
