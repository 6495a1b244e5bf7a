/**
 * KS-result table: per-class rows, one column per test instance, each cell
 * showing the statistic D and its p-value (`class,instance,D,p_value,n,m`).
 */

import { CsvTable, column, requireColumns } from "./csv.js";
import { document, el, text } from "./svg.js";

export interface KsCell {
  d: number | null;
  p: number | null;
}

export interface KsGrid {
  classes: string[];
  instances: string[];
  cells: Map<string, KsCell>;   // `${cls}|${inst}`
}

export function ksGridFromCsv(table: CsvTable): KsGrid {
  requireColumns(table, ["class", "instance", "D", "p_value", "n", "m"]);
  const classes: string[] = [];
  const instances: string[] = [];
  const cells = new Map<string, KsCell>();
  const cls = column(table, "class");
  const inst = column(table, "instance");
  const dvals = column(table, "D");
  const pvals = column(table, "p_value");
  for (let i = 0; i < cls.length; i++) {
    if (!classes.includes(cls[i])) classes.push(cls[i]);
    if (!instances.includes(inst[i])) instances.push(inst[i]);
    cells.set(`${cls[i]}|${inst[i]}`, {
      d: dvals[i] === "" ? null : Number(dvals[i]),
      p: pvals[i] === "" ? null : Number(pvals[i]),
    });
  }
  return { classes, instances, cells };
}

const INSTANCE_LABELS: Record<string, string> = {
  full_legit_vs_adv: "full legit vs adv",
  sampled50_legit_vs_adv: "50 legit vs 50 adv",
  control_legit_vs_legit: "control (legit vs legit)",
};

export function renderKsTable(grid: KsGrid, title: string): string {
  const colW = 170;
  const rowH = 46;
  const left = 90;
  const top = 80;
  const W = left + grid.instances.length * colW + 20;
  const H = top + grid.classes.length * rowH + 30;
  const parts: string[] = [];

  parts.push(text(W / 2, 26, title, { "font-size": 14, "text-anchor": "middle", "font-weight": "bold" }));
  grid.instances.forEach((inst, j) => {
    parts.push(text(left + j * colW + colW / 2, top - 12, INSTANCE_LABELS[inst] ?? inst, {
      "font-size": 11, "text-anchor": "middle", "font-weight": "bold",
    }));
  });
  grid.classes.forEach((cls, i) => {
    parts.push(text(left - 8, top + i * rowH + rowH / 2 + 4, cls, {
      "font-size": 12, "text-anchor": "end", "font-weight": "bold",
    }));
    grid.instances.forEach((inst, j) => {
      const cell = grid.cells.get(`${cls}|${inst}`);
      const x = left + j * colW;
      const y = top + i * rowH;
      const detected = cell?.p != null && cell.p < 0.05;
      parts.push(el("rect", {
        x, y, width: colW - 6, height: rowH - 6,
        fill: cell?.p == null ? "#eee" : detected ? "#fde0dd" : "#e5f5e0",
        stroke: "#999", class: "cell",
      }));
      const label = cell?.p == null
        ? "n/a"
        : `D=${cell.d!.toFixed(3)}  p=${cell.p.toExponential(1)}`;
      parts.push(text(x + (colW - 6) / 2, y + rowH / 2 - 1, label, {
        "font-size": 11, "text-anchor": "middle",
      }));
    });
  });
  return document(W, H, parts);
}
