#!/usr/bin/env node
/**
 * make-figures: render every known rf-advdef CSV in a directory to SVG.
 *
 *   make-figures --in <csv-dir> --out <fig-dir> [--kind <kind>]
 *
 * Kinds: accuracy_curves | confusion_heatmap | simplex_scatter | ks_table.
 * Input CSVs are never modified.
 */

import * as fs from "node:fs";
import * as path from "node:path";
import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { parseCsv } from "./csv.js";
import { renderAccuracyCurves, traceSeries, TraceSeries } from "./accuracyCurves.js";
import { confusionFromCsv, renderConfusionHeatmap } from "./confusionHeatmap.js";
import { renderSimplexScatter, simplexFromCsv } from "./simplexScatter.js";
import { ksGridFromCsv, renderKsTable } from "./ksTable.js";

export type FigureKind = "accuracy_curves" | "confusion_heatmap" | "simplex_scatter" | "ks_table";

const KINDS: FigureKind[] = ["accuracy_curves", "confusion_heatmap", "simplex_scatter", "ks_table"];

function read(file: string) {
  return parseCsv(fs.readFileSync(file, "utf-8"));
}

function titleFromName(name: string): string {
  return name.replace(/\.csv$/, "").replace(/_/g, " ");
}

/** Render one kind from the CSVs present in `inDir`; returns written paths. */
export function renderKind(kind: FigureKind, inDir: string, outDir: string): string[] {
  const files = fs.readdirSync(inDir).filter((f) => f.endsWith(".csv"));
  const written: string[] = [];
  const save = (name: string, svg: string) => {
    const out = path.join(outDir, name);
    fs.writeFileSync(out, svg);
    written.push(out);
  };

  if (kind === "accuracy_curves") {
    const series: TraceSeries[] = [];
    for (const [file, tag] of [
      ["classical_trace.csv", "classical"],
      ["ae_classifier_trace.csv", "AE-pretrained"],
    ] as const) {
      const full = path.join(inDir, file);
      if (fs.existsSync(full)) {
        series.push(...traceSeries(read(full), tag));
      }
    }
    if (series.length > 0) {
      save("accuracy_curves.svg", renderAccuracyCurves(series, "Accuracy over training epochs"));
    }
  } else if (kind === "confusion_heatmap") {
    for (const f of files.filter((f) => f.startsWith("confusion_"))) {
      save(f.replace(/\.csv$/, ".svg"),
           renderConfusionHeatmap(confusionFromCsv(read(path.join(inDir, f))), titleFromName(f)));
    }
  } else if (kind === "simplex_scatter") {
    for (const f of files.filter((f) => f.startsWith("simplex_") && !f.includes("trace"))) {
      save(f.replace(/\.csv$/, ".svg"),
           renderSimplexScatter(simplexFromCsv(read(path.join(inDir, f))), titleFromName(f)));
    }
  } else if (kind === "ks_table") {
    for (const f of files.filter((f) => f.startsWith("ks_"))) {
      save(f.replace(/\.csv$/, ".svg"),
           renderKsTable(ksGridFromCsv(read(path.join(inDir, f))), titleFromName(f)));
    }
  }
  return written;
}

export function main(argv: string[]): number {
  const args = yargs(argv)
    .option("in", { type: "string", demandOption: true, describe: "directory of rf-advdef CSVs" })
    .option("out", { type: "string", demandOption: true, describe: "output directory for SVGs" })
    .option("kind", { type: "string", choices: KINDS, describe: "render only one figure kind" })
    .strict()
    .parseSync();

  const inDir = args.in as string;
  const outDir = args.out as string;
  if (!fs.existsSync(inDir)) {
    console.error(`input directory not found: ${inDir}`);
    return 1;
  }
  fs.mkdirSync(outDir, { recursive: true });
  const kinds = args.kind ? [args.kind as FigureKind] : KINDS;
  const written: string[] = [];
  for (const kind of kinds) {
    try {
      written.push(...renderKind(kind, inDir, outDir));
    } catch (err) {
      console.error(`${kind}: ${(err as Error).message}`);
      return 1;
    }
  }
  if (written.length === 0) {
    console.error(`no renderable CSVs found in ${inDir}`);
    return 1;
  }
  for (const w of written) {
    console.log(w);
  }
  return 0;
}

const isMain = process.argv[1] && path.resolve(process.argv[1]) === path.resolve(new URL(import.meta.url).pathname);
if (isMain) {
  process.exit(main(hideBin(process.argv)));
}
