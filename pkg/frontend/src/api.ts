// Typed client for the /api/v1 surface. Every value shown in the UI
// comes straight from these payloads; nothing is recomputed here.

export interface ScenarioInfo {
  id: string;
  name: string;
  created_at: number;
  n_timesteps: number;
  n_vehicles: number;
  warnings: string[];
}

export interface AlgorithmParam {
  name: string;
  type: string;
  default: number;
}

export interface AlgorithmInfo {
  id: string;
  label: string;
  params: AlgorithmParam[];
}

export interface RunInfo {
  id: string;
  scenario_id: string;
  config: { cluster: Record<string, unknown> };
  status: "queued" | "running" | "done" | "failed" | "cancelled";
  progress: number;
  error: string;
}

export interface Summary {
  avg_ch_duration_s: number;
  avg_cm_duration_s: number;
  avg_ch_changes_per_vehicle: number;
  avg_num_clusters: number;
  avg_num_cm: number;
  avg_num_unclustered: number;
  n_timesteps: number;
  n_vehicles: number;
  nominal_dt: number;
}

export class ApiError extends Error {
  constructor(public status: number, public errors: string[]) {
    super(errors.join("; "));
  }
}

const BASE = "/api/v1";

async function check(res: Response): Promise<Response> {
  if (res.ok) return res;
  let errors = [`HTTP ${res.status}`];
  try {
    const body = await res.json();
    if (Array.isArray(body.errors)) errors = body.errors;
  } catch {
    // non-JSON error body; keep the status line
  }
  throw new ApiError(res.status, errors);
}

export async function listScenarios(): Promise<ScenarioInfo[]> {
  return (await check(await fetch(`${BASE}/scenarios`))).json();
}

export async function uploadScenario(
  name: string,
  body: Blob | string,
  contentType: string,
): Promise<ScenarioInfo> {
  const res = await fetch(`${BASE}/scenarios?name=${encodeURIComponent(name)}`, {
    method: "POST",
    headers: { "content-type": contentType },
    body,
  });
  return (await check(res)).json();
}

export async function listAlgorithms(): Promise<AlgorithmInfo[]> {
  return (await check(await fetch(`${BASE}/algorithms`))).json();
}

export async function createRun(
  scenarioId: string,
  algorithm: string,
  rangeM: number,
  params: Record<string, number>,
): Promise<RunInfo> {
  const res = await fetch(`${BASE}/runs`, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify({ scenario_id: scenarioId, algorithm, range_m: rangeM, params }),
  });
  return (await check(res)).json();
}

export async function listRuns(): Promise<RunInfo[]> {
  return (await check(await fetch(`${BASE}/runs`))).json();
}

export async function getRun(id: string): Promise<RunInfo> {
  return (await check(await fetch(`${BASE}/runs/${id}`))).json();
}

export async function fetchSummary(id: string): Promise<Summary> {
  return (await check(await fetch(`${BASE}/runs/${id}/summary`))).json();
}

export async function fetchGraphCsv(id: string): Promise<string> {
  return (await check(await fetch(`${BASE}/runs/${id}/graph.csv`))).text();
}

export async function fetchReportPage(
  id: string,
  offset: number,
  limit: number,
): Promise<string> {
  const res = await fetch(`${BASE}/runs/${id}/report.jsonl?offset=${offset}&limit=${limit}`);
  return (await check(res)).text();
}
