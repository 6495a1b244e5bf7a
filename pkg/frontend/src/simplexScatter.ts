/**
 * Probability-simplex scatter for 3-class softmax outputs: each row of
 * (p_A,p_B,p_C) is a barycentric point inside the triangle whose corners are
 * the one-hot vertices; points are colored by their argmax class.
 */

import { CsvTable, SchemaError } from "./csv.js";
import { document, el, text, SERIES_COLORS } from "./svg.js";

export interface SimplexData {
  classes: string[];    // from the p_<name> headers
  probs: number[][];    // rows of 3 probabilities
}

export function simplexFromCsv(table: CsvTable): SimplexData {
  const pcols = table.header.filter((h) => h.startsWith("p_"));
  if (pcols.length !== 3 || table.header.length !== 3) {
    throw new SchemaError(
      `simplex CSV needs exactly three p_<class> columns, got: ${table.header.join(", ")}`);
  }
  if (table.rows.length === 0) {
    throw new SchemaError("empty CSV: no data rows");
  }
  const probs = table.rows.map((r) => r.map(Number));
  return { classes: pcols.map((c) => c.slice(2)), probs };
}

const SIDE = 460;
const W = 560;
const H = 540;

/** Barycentric -> 2D: vertex 0 top, vertex 1 bottom-left, vertex 2 bottom-right. */
export function project(p: number[]): [number, number] {
  const v0: [number, number] = [W / 2, 60];
  const v1: [number, number] = [W / 2 - SIDE / 2, 60 + (SIDE * Math.sqrt(3)) / 2];
  const v2: [number, number] = [W / 2 + SIDE / 2, 60 + (SIDE * Math.sqrt(3)) / 2];
  return [
    p[0] * v0[0] + p[1] * v1[0] + p[2] * v2[0],
    p[0] * v0[1] + p[1] * v1[1] + p[2] * v2[1],
  ];
}

export function renderSimplexScatter(data: SimplexData, title: string): string {
  const corners = [project([1, 0, 0]), project([0, 1, 0]), project([0, 0, 1])];
  const parts: string[] = [];
  parts.push(el("polygon", {
    points: corners.map(([x, y]) => `${x.toFixed(1)},${y.toFixed(1)}`).join(" "),
    fill: "none", stroke: "#333", "stroke-width": 1.5,
  }));
  const labelOffsets: [number, number][] = [[0, -12], [-16, 16], [16, 16]];
  data.classes.forEach((c, i) => {
    parts.push(text(corners[i][0] + labelOffsets[i][0], corners[i][1] + labelOffsets[i][1], c, {
      "font-size": 13, "text-anchor": "middle", "font-weight": "bold",
      fill: SERIES_COLORS[i],
    }));
  });
  for (const p of data.probs) {
    const [x, y] = project(p);
    const cls = p.indexOf(Math.max(...p));
    parts.push(el("circle", {
      cx: x.toFixed(1), cy: y.toFixed(1), r: 2.4,
      fill: SERIES_COLORS[cls], "fill-opacity": 0.45, class: "pt",
    }));
  }
  parts.push(text(W / 2, 28, title, { "font-size": 14, "text-anchor": "middle", "font-weight": "bold" }));
  return document(W, H, parts);
}
