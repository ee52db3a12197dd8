import { describe, expect, it } from "vitest";

import {
  GRAPH_HEADER,
  chartMax,
  nextOffset,
  parseGraphCsv,
  parseReportJsonl,
  prevOffset,
  seriesPolyline,
} from "../src/parse.js";

describe("parseGraphCsv", () => {
  it("parses header plus rows", () => {
    const text = `${GRAPH_HEADER}\n0,3,1,1,1\n1,3,2,1,0\n`;
    const series = parseGraphCsv(text);
    expect(series).toHaveLength(2);
    expect(series[0]).toEqual({ t: 0, n_vehicles: 3, n_clusters: 1, n_cm: 1, n_unclustered: 1 });
    expect(series[1].n_clusters).toBe(2);
  });

  it("handles fractional timestamps", () => {
    const series = parseGraphCsv(`${GRAPH_HEADER}\n0.5,1,0,0,1\n`);
    expect(series[0].t).toBe(0.5);
  });

  it("rejects a wrong header", () => {
    expect(() => parseGraphCsv("a,b\n1,2\n")).toThrow(/unexpected graph header/);
  });

  it("returns no points for a header-only file", () => {
    expect(parseGraphCsv(`${GRAPH_HEADER}\n`)).toEqual([]);
  });
});

describe("parseReportJsonl", () => {
  it("parses one record per line", () => {
    const line =
      '{"t": 0, "veh": "A", "x": 0, "y": 0, "speed": 10, "angle": 90, ' +
      '"degree": 1, "role": "CH", "cluster": "A", "dist_ch": 0}';
    const rows = parseReportJsonl(`${line}\n${line}\n`);
    expect(rows).toHaveLength(2);
    expect(rows[0].role).toBe("CH");
    expect(rows[0].cluster).toBe("A");
  });

  it("keeps nulls for unclustered vehicles", () => {
    const rows = parseReportJsonl(
      '{"t": 0, "veh": "C", "x": 1, "y": 2, "speed": 0, "angle": 0, ' +
        '"degree": 0, "role": "UNCLUSTERED", "cluster": null, "dist_ch": null}\n',
    );
    expect(rows[0].cluster).toBeNull();
    expect(rows[0].dist_ch).toBeNull();
  });

  it("treats an empty body as zero rows", () => {
    expect(parseReportJsonl("")).toEqual([]);
  });
});

describe("seriesPolyline", () => {
  it("spans the full width and flips the y axis", () => {
    const pts = seriesPolyline([0, 1, 2], [0, 5, 10], 100, 50, 10);
    expect(pts).toBe("0,50 50,25 100,0");
  });

  it("renders a flat series as a horizontal line", () => {
    const pts = seriesPolyline([0, 1], [4, 4], 100, 50, 8);
    expect(pts).toBe("0,25 100,25");
  });

  it("is empty for an empty series", () => {
    expect(seriesPolyline([], [], 100, 50, 1)).toBe("");
  });

  it("does not divide by zero for a single point", () => {
    expect(seriesPolyline([2], [1], 100, 50, 0)).toBe("0,0");
  });
});

describe("chartMax", () => {
  it("takes the max over the three plotted series", () => {
    const series = parseGraphCsv(`${GRAPH_HEADER}\n0,9,2,5,1\n1,9,3,1,4\n`);
    expect(chartMax(series)).toBe(5);
  });
});

describe("pagination", () => {
  it("advances while pages come back full", () => {
    expect(nextOffset(0, 50, 50)).toBe(50);
    expect(nextOffset(50, 50, 50)).toBe(100);
  });

  it("stops after a short page", () => {
    expect(nextOffset(100, 50, 17)).toBeNull();
    expect(nextOffset(0, 50, 0)).toBeNull();
  });

  it("steps back and clamps at zero", () => {
    expect(prevOffset(100, 50)).toBe(50);
    expect(prevOffset(30, 50)).toBe(0);
    expect(prevOffset(0, 50)).toBeNull();
  });
});
