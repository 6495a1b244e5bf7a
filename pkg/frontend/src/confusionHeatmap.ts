/**
 * Row-normalized confusion-matrix heatmap (`true_class,<pred columns...>`),
 * cells annotated with their values.
 */

import { CsvTable, requireColumns } from "./csv.js";
import { document, el, text, viridis } from "./svg.js";

export interface ConfusionMatrix {
  classes: string[];
  values: number[][];   // [true][pred]
}

export function confusionFromCsv(table: CsvTable): ConfusionMatrix {
  requireColumns(table, ["true_class"]);
  const classes = table.header.slice(1);
  if (classes.length === 0) {
    throw new Error("confusion CSV has no predicted-class columns");
  }
  const values = table.rows.map((r) => r.slice(1).map(Number));
  return { classes, values };
}

export function renderConfusionHeatmap(mat: ConfusionMatrix, title: string): string {
  const n = mat.classes.length;
  const cell = 72;
  const left = 90;
  const top = 70;
  const W = left + n * cell + 30;
  const H = top + n * cell + 40;
  const parts: string[] = [];

  parts.push(text(W / 2, 24, title, { "font-size": 14, "text-anchor": "middle", "font-weight": "bold" }));
  mat.classes.forEach((c, j) => {
    parts.push(text(left + j * cell + cell / 2, top - 10, c, { "font-size": 12, "text-anchor": "middle" }));
  });
  mat.values.forEach((row, i) => {
    parts.push(text(left - 8, top + i * cell + cell / 2 + 4, mat.classes[i], {
      "font-size": 12, "text-anchor": "end",
    }));
    row.forEach((v, j) => {
      parts.push(el("rect", {
        x: left + j * cell, y: top + i * cell, width: cell, height: cell,
        fill: viridis(v), stroke: "#fff", class: "cell",
      }));
      parts.push(text(left + j * cell + cell / 2, top + i * cell + cell / 2 + 4, v.toFixed(2), {
        "font-size": 12, "text-anchor": "middle", fill: v > 0.55 ? "#000" : "#fff",
      }));
    });
  });
  parts.push(text(left + (n * cell) / 2, top + n * cell + 26, "predicted class", {
    "font-size": 12, "text-anchor": "middle",
  }));
  parts.push(text(20, top + (n * cell) / 2, "true class", {
    "font-size": 12, "text-anchor": "middle",
    transform: `rotate(-90 20 ${top + (n * cell) / 2})`,
  }));
  return document(W, H, parts);
}
