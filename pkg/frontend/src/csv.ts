/** Minimal reader for the solver's CSV artifacts (no quoting, '.' decimal). */

export interface Table {
  header: string[];
  /** column name -> raw string cells, row-aligned */
  columns: Map<string, string[]>;
  rowCount: number;
}

export function parseCsv(text: string): Table {
  const lines = text.split("\n").filter((l) => l.length > 0);
  if (lines.length === 0) throw new Error("empty CSV");
  const header = lines[0].split(",");
  const columns = new Map<string, string[]>(header.map((h) => [h, []]));
  for (let i = 1; i < lines.length; i++) {
    const cells = lines[i].split(",");
    if (cells.length !== header.length) {
      throw new Error(`row ${i} has ${cells.length} cells, expected ${header.length}`);
    }
    for (let j = 0; j < header.length; j++) columns.get(header[j])!.push(cells[j]);
  }
  return { header, columns, rowCount: lines.length - 1 };
}

export function numericColumn(table: Table, name: string): number[] {
  const raw = table.columns.get(name);
  if (raw === undefined) {
    throw new Error(`column '${name}' not found (header: ${table.header.join(", ")})`);
  }
  return raw.map((cell, i) => {
    const v = Number(cell);
    if (!Number.isFinite(v)) throw new Error(`column '${name}' row ${i}: non-finite value '${cell}'`);
    return v;
  });
}

/** Distinct values of a column in first-appearance order. */
export function distinct(table: Table, name: string): string[] {
  const raw = table.columns.get(name);
  if (raw === undefined) {
    throw new Error(`column '${name}' not found (header: ${table.header.join(", ")})`);
  }
  const seen = new Set<string>();
  const out: string[] = [];
  for (const v of raw) {
    if (!seen.has(v)) {
      seen.add(v);
      out.push(v);
    }
  }
  return out;
}

/** Row indices where the column holds the given raw value. */
export function rowsWhere(table: Table, name: string, value: string): number[] {
  const raw = table.columns.get(name)!;
  const idx: number[] = [];
  for (let i = 0; i < raw.length; i++) if (raw[i] === value) idx.push(i);
  return idx;
}
