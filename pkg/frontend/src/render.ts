/** Turn CSV artifacts into SVG panels: one file per PanelSpec.
 *
 * Rendering never recomputes model quantities; the only derived number is
 * the OLS slope annotated on log-log panels, fitted to exactly the plotted
 * points.  Panels fail independently: a missing column or nonpositive
 * log-log data marks that panel failed in the report and leaves the rest
 * untouched.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { Table, distinct, numericColumn, parseCsv, rowsWhere } from "./csv.js";
import { HLine, Manifest, PanelSpec } from "./manifest.js";
import { fitLogLogSlope } from "./slope.js";
import { HEIGHT, MARGIN, PALETTE, SvgBuilder, WIDTH, linearScale, log10Scale } from "./svg.js";

export interface PanelResult {
  out: string;
  ok: boolean;
  error?: string;
  /** per-series fitted slopes for loglog panels, keyed by legend label */
  slopes?: Record<string, number>;
}

export interface RenderReport {
  results: PanelResult[];
  ok: boolean;
}

interface SeriesData {
  label: string;
  x: number[];
  y: number[];
}

interface HLineData {
  label: string;
  value: number;
}

function pick(values: number[], rows: number[]): number[] {
  return rows.map((i) => values[i]);
}

function collectSeries(table: Table, spec: PanelSpec): { series: SeriesData[]; hlines: HLineData[] } {
  const xAll = numericColumn(table, spec.x);
  const groups: { key: string; rows: number[] }[] = spec.group_by
    ? distinct(table, spec.group_by).map((v) => ({ key: v, rows: rowsWhere(table, spec.group_by!, v) }))
    : [{ key: "", rows: xAll.map((_, i) => i) }];

  const series: SeriesData[] = [];
  const hlines: HLineData[] = [];
  for (const g of groups) {
    const suffix = g.key === "" ? "" : ` (${spec.group_by}=${g.key})`;
    for (const s of spec.series) {
      const col = numericColumn(table, s.column);
      series.push({ label: s.label + suffix, x: pick(xAll, g.rows), y: pick(col, g.rows) });
    }
    for (const h of spec.hlines ?? []) {
      const value = h.column !== undefined ? numericColumn(table, h.column)[g.rows[0]] : h.value!;
      hlines.push({ label: (h.label ?? h.column ?? "level") + suffix, value });
    }
  }
  return { series, hlines };
}

function renderPanel(spec: PanelSpec, baseDir: string, outDir: string): PanelResult {
  const csvPath = path.resolve(baseDir, spec.csv);
  const table = parseCsv(fs.readFileSync(csvPath, "utf-8"));
  const { series, hlines } = collectSeries(table, spec);

  const log = spec.kind === "loglog";
  const xs = series.flatMap((s) => s.x);
  const ys = series.flatMap((s) => s.y).concat(hlines.map((h) => h.value));
  if (log && (xs.some((v) => v <= 0) || ys.some((v) => v <= 0))) {
    throw new Error("loglog panel requires strictly positive data");
  }
  const [xLo, xHi] = [Math.min(...xs), Math.max(...xs)];
  const [yLo, yHi] = [Math.min(...ys), Math.max(...ys)];
  const pad = log ? 1 : 0.05 * (yHi - yLo || 1);
  const sx = (log ? log10Scale : linearScale)(xLo, xHi, MARGIN.left, WIDTH - MARGIN.right);
  const sy = (log ? log10Scale : linearScale)(
    log ? yLo / 2 : yLo - pad,
    log ? yHi * 2 : yHi + pad,
    HEIGHT - MARGIN.bottom,
    MARGIN.top,
  );

  const svg = new SvgBuilder(spec.title ?? path.basename(spec.out, ".svg"));
  svg.axes(sx, sy, spec.x, log, log);

  const legend: { label: string; color: string; dashed?: boolean }[] = [];
  const slopes: Record<string, number> = {};
  series.forEach((s, i) => {
    const color = PALETTE[i % PALETTE.length];
    svg.polyline(s.x.map(sx), s.y.map(sy), color);
    legend.push({ label: s.label, color });
    if (log) slopes[s.label] = fitLogLogSlope(s.x, s.y).slope;
  });
  hlines.forEach((h, i) => {
    const color = PALETTE[(series.length + i) % PALETTE.length];
    svg.hline(sy(h.value), color);
    legend.push({ label: h.label, color, dashed: true });
  });
  svg.legend(legend);
  if (log) {
    Object.entries(slopes).forEach(([label, slope], i) => {
      svg.annotation(`${label}: slope ${slope.toFixed(3)}`, i);
    });
  }

  const outPath = path.resolve(outDir, spec.out);
  fs.mkdirSync(path.dirname(outPath), { recursive: true });
  fs.writeFileSync(outPath, svg.render(), "utf-8");
  return { out: spec.out, ok: true, slopes: log ? slopes : undefined };
}

export function renderPanels(manifest: Manifest, baseDir: string, outDir: string): RenderReport {
  const results: PanelResult[] = [];
  for (const spec of manifest.panels) {
    try {
      results.push(renderPanel(spec, baseDir, outDir));
    } catch (err) {
      results.push({ out: spec.out, ok: false, error: err instanceof Error ? err.message : String(err) });
    }
  }
  return { results, ok: results.every((r) => r.ok) };
}
