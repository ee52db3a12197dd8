// Pure parsing and chart-geometry helpers, kept DOM-free so the test
// suite can exercise them directly.

export interface SeriesPoint {
  t: number;
  n_vehicles: number;
  n_clusters: number;
  n_cm: number;
  n_unclustered: number;
}

export interface ReportRow {
  t: number;
  veh: string;
  x: number;
  y: number;
  speed: number;
  angle: number;
  degree: number;
  role: "CH" | "CM" | "UNCLUSTERED";
  cluster: string | null;
  dist_ch: number | null;
}

export const GRAPH_HEADER = "t,n_vehicles,n_clusters,n_cm,n_unclustered";

export function parseGraphCsv(text: string): SeriesPoint[] {
  const lines = text.split("\n").filter((s) => s.length > 0);
  if (lines.length === 0 || lines[0] !== GRAPH_HEADER) {
    throw new Error(`unexpected graph header: ${lines[0] ?? "(empty)"}`);
  }
  return lines.slice(1).map((line) => {
    const [t, nv, nc, ncm, nu] = line.split(",");
    return {
      t: Number(t),
      n_vehicles: Number(nv),
      n_clusters: Number(nc),
      n_cm: Number(ncm),
      n_unclustered: Number(nu),
    };
  });
}

export function parseReportJsonl(text: string): ReportRow[] {
  return text
    .split("\n")
    .filter((s) => s.length > 0)
    .map((line) => JSON.parse(line) as ReportRow);
}

// Polyline for an SVG chart: x spans [0, width] over the t range, y is
// flipped (SVG origin is top-left) and scaled to [0, maxValue].
export function seriesPolyline(
  ts: number[],
  values: number[],
  width: number,
  height: number,
  maxValue: number,
): string {
  if (ts.length === 0) return "";
  const t0 = ts[0];
  const tSpan = ts[ts.length - 1] - t0 || 1;
  const vSpan = maxValue || 1;
  return ts
    .map((t, i) => {
      const x = ((t - t0) / tSpan) * width;
      const y = height - (values[i] / vSpan) * height;
      return `${round2(x)},${round2(y)}`;
    })
    .join(" ");
}

function round2(v: number): number {
  return Math.round(v * 100) / 100;
}

export function chartMax(series: SeriesPoint[]): number {
  let m = 0;
  for (const p of series) {
    m = Math.max(m, p.n_clusters, p.n_cm, p.n_unclustered);
  }
  return m;
}

// Pagination over a record count that is not known up front: a page is
// "last" when it came back shorter than the limit.
export function nextOffset(offset: number, limit: number, got: number): number | null {
  return got < limit ? null : offset + limit;
}

export function prevOffset(offset: number, limit: number): number | null {
  return offset <= 0 ? null : Math.max(0, offset - limit);
}
