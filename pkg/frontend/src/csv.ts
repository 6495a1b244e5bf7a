/**
 * CSV reading for the rf-advdef output files.
 *
 * Every file starts with `# config_hash=... seed=...` comment lines, then a
 * header row, then unquoted comma-separated values. Schema checks report the
 * first missing column by name.
 */

export interface CsvTable {
  comments: string[];
  header: string[];
  rows: string[][];
}

export class SchemaError extends Error {}

export function parseCsv(text: string): CsvTable {
  const lines = text.split(/\r?\n/).filter((ln) => ln.length > 0);
  const comments = lines.filter((ln) => ln.startsWith("#"));
  const body = lines.filter((ln) => !ln.startsWith("#"));
  if (body.length === 0) {
    throw new SchemaError("empty CSV: no header row");
  }
  const header = body[0].split(",").map((h) => h.trim());
  const rows = body.slice(1).map((ln) => ln.split(",").map((v) => v.trim()));
  return { comments, header, rows };
}

export function requireColumns(table: CsvTable, needed: string[]): void {
  for (const col of needed) {
    if (!table.header.includes(col)) {
      throw new SchemaError(`missing column "${col}" (have: ${table.header.join(", ")})`);
    }
  }
  if (table.rows.length === 0) {
    throw new SchemaError("empty CSV: no data rows");
  }
}

export function column(table: CsvTable, name: string): string[] {
  const i = table.header.indexOf(name);
  if (i < 0) {
    throw new SchemaError(`missing column "${name}"`);
  }
  return table.rows.map((r) => r[i]);
}

export function numericColumn(table: CsvTable, name: string): number[] {
  return column(table, name).map((v) => (v === "" ? NaN : Number(v)));
}
