/**
 * Accuracy-over-epochs figure: overlays clean and adversarial test accuracy
 * for the classically trained and the AE-pretrained classifiers (four
 * series) from their trace CSVs (`epoch,train_loss,clean_acc,adv_acc`).
 */

import { CsvTable, numericColumn, requireColumns } from "./csv.js";
import { document, el, scale, text, SERIES_COLORS } from "./svg.js";

export interface TraceSeries {
  label: string;
  epochs: number[];
  values: number[];
}

export function traceSeries(table: CsvTable, tag: string): TraceSeries[] {
  requireColumns(table, ["epoch", "train_loss", "clean_acc", "adv_acc"]);
  const epochs = numericColumn(table, "epoch");
  return [
    { label: `${tag} legitimate`, epochs, values: numericColumn(table, "clean_acc") },
    { label: `${tag} adversarial`, epochs, values: numericColumn(table, "adv_acc") },
  ];
}

const W = 640;
const H = 420;
const M = { left: 60, right: 20, top: 40, bottom: 46 };

export function renderAccuracyCurves(series: TraceSeries[], title: string): string {
  if (series.length === 0) {
    throw new Error("no series to plot");
  }
  const maxEpoch = Math.max(...series.flatMap((s) => s.epochs));
  const sx = scale(1, maxEpoch, M.left, W - M.right);
  const sy = scale(0, 1, H - M.bottom, M.top);
  const parts: string[] = [];

  parts.push(el("line", { x1: M.left, y1: sy(0), x2: W - M.right, y2: sy(0), stroke: "#333" }));
  parts.push(el("line", { x1: M.left, y1: sy(0), x2: M.left, y2: sy(1), stroke: "#333" }));
  for (let v = 0; v <= 1.001; v += 0.2) {
    parts.push(el("line", { x1: M.left - 4, y1: sy(v), x2: W - M.right, y2: sy(v), stroke: "#ddd" }));
    parts.push(text(M.left - 8, sy(v) + 4, v.toFixed(1), { "font-size": 11, "text-anchor": "end" }));
  }
  const step = Math.max(1, Math.round(maxEpoch / 8));
  for (let e = 1; e <= maxEpoch; e += step) {
    parts.push(text(sx(e), H - M.bottom + 16, String(e), { "font-size": 11, "text-anchor": "middle" }));
  }

  series.forEach((s, i) => {
    const pts = s.epochs.map((e, k) => `${sx(e).toFixed(1)},${sy(s.values[k]).toFixed(1)}`).join(" ");
    const dash = s.label.includes("adversarial") ? "6,3" : "none";
    parts.push(el("polyline", {
      points: pts,
      fill: "none",
      stroke: SERIES_COLORS[i % SERIES_COLORS.length],
      "stroke-width": 2,
      "stroke-dasharray": dash,
      class: "series",
    }));
    const lx = W - M.right - 190;
    const ly = M.top + 16 * i;
    parts.push(el("line", {
      x1: lx, y1: ly - 4, x2: lx + 24, y2: ly - 4,
      stroke: SERIES_COLORS[i % SERIES_COLORS.length], "stroke-width": 2,
      "stroke-dasharray": dash,
    }));
    parts.push(text(lx + 30, ly, s.label, { "font-size": 11 }));
  });

  parts.push(text(W / 2, 20, title, { "font-size": 14, "text-anchor": "middle", "font-weight": "bold" }));
  parts.push(text(W / 2, H - 10, "epoch", { "font-size": 12, "text-anchor": "middle" }));
  parts.push(text(14, H / 2, "accuracy", {
    "font-size": 12, "text-anchor": "middle", transform: `rotate(-90 14 ${H / 2})`,
  }));
  return document(W, H, parts);
}
