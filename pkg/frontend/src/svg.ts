/** Deterministic SVG assembly: fixed layout, fixed precision, no state. */

export const WIDTH = 640;
export const HEIGHT = 420;
export const MARGIN = { top: 40, right: 24, bottom: 46, left: 64 };

export const PALETTE = [
  "#1f77b4",
  "#d62728",
  "#2ca02c",
  "#9467bd",
  "#ff7f0e",
  "#8c564b",
  "#17becf",
  "#7f7f7f",
];

const fmt = (v: number): string => v.toFixed(2);

export function escapeXml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export interface Scale {
  (v: number): number;
  ticks: number[];
}

function niceTicks(lo: number, hi: number, count = 5): number[] {
  if (!(hi > lo)) return [lo];
  const span = hi - lo;
  const step0 = span / count;
  const mag = 10 ** Math.floor(Math.log10(step0));
  const step = [1, 2, 2.5, 5, 10].map((m) => m * mag).find((s) => span / s <= count + 1) ?? mag * 10;
  const first = Math.ceil(lo / step) * step;
  const out: number[] = [];
  for (let v = first; v <= hi + 1e-12 * span; v += step) out.push(Number(v.toPrecision(12)));
  return out;
}

export function linearScale(lo: number, hi: number, outLo: number, outHi: number): Scale {
  if (!(hi > lo)) {
    const pad = Math.abs(lo) * 0.5 || 0.5;
    lo -= pad;
    hi += pad;
  }
  const f = ((v: number) => outLo + ((v - lo) / (hi - lo)) * (outHi - outLo)) as Scale;
  f.ticks = niceTicks(lo, hi);
  return f;
}

export function log10Scale(lo: number, hi: number, outLo: number, outHi: number): Scale {
  const llo = Math.log10(lo);
  const lhi = Math.log10(hi);
  const base = linearScale(llo, lhi === llo ? llo + 1 : lhi, outLo, outHi);
  const f = ((v: number) => base(Math.log10(v))) as Scale;
  const ticks: number[] = [];
  for (let e = Math.ceil(llo - 1e-9); e <= Math.floor(lhi + 1e-9); e++) ticks.push(10 ** e);
  f.ticks = ticks.length >= 2 ? ticks : [lo, hi];
  return f;
}

export function tickLabel(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e4 || a < 1e-3) return v.toExponential(0);
  return Number(v.toPrecision(6)).toString();
}

export class SvgBuilder {
  private parts: string[] = [];

  constructor(title?: string) {
    this.parts.push(
      `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" ` +
        `viewBox="0 0 ${WIDTH} ${HEIGHT}" font-family="sans-serif" font-size="12">`,
      `<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>`,
    );
    if (title) {
      this.parts.push(
        `<text x="${WIDTH / 2}" y="22" text-anchor="middle" font-size="14">${escapeXml(title)}</text>`,
      );
    }
  }

  axes(xs: Scale, ys: Scale, xLabel: string, logx = false, logy = false): void {
    const { top, bottom, left } = MARGIN;
    const x0 = left;
    const x1 = WIDTH - MARGIN.right;
    const y0 = HEIGHT - bottom;
    const y1 = top;
    this.parts.push(
      `<line x1="${x0}" y1="${y0}" x2="${x1}" y2="${y0}" stroke="black"/>`,
      `<line x1="${x0}" y1="${y0}" x2="${x0}" y2="${y1}" stroke="black"/>`,
    );
    for (const t of xs.ticks) {
      const px = fmt(xs(t));
      this.parts.push(
        `<line x1="${px}" y1="${y0}" x2="${px}" y2="${y0 + 4}" stroke="black"/>`,
        `<text x="${px}" y="${y0 + 18}" text-anchor="middle">${escapeXml(
          logx ? `1e${Math.round(Math.log10(t))}` : tickLabel(t),
        )}</text>`,
      );
    }
    for (const t of ys.ticks) {
      const py = fmt(ys(t));
      this.parts.push(
        `<line x1="${x0 - 4}" y1="${py}" x2="${x0}" y2="${py}" stroke="black"/>`,
        `<text x="${x0 - 8}" y="${py}" text-anchor="end" dominant-baseline="middle">${escapeXml(
          logy ? `1e${Math.round(Math.log10(t))}` : tickLabel(t),
        )}</text>`,
      );
    }
    this.parts.push(
      `<text x="${(x0 + x1) / 2}" y="${HEIGHT - 10}" text-anchor="middle">${escapeXml(xLabel)}</text>`,
    );
  }

  polyline(xs: number[], ys: number[], color: string, dashed = false): void {
    const points = xs.map((x, i) => `${fmt(x)},${fmt(ys[i])}`).join(" ");
    const dash = dashed ? ` stroke-dasharray="6,4"` : "";
    this.parts.push(`<polyline fill="none" stroke="${color}"${dash} points="${points}"/>`);
  }

  hline(y: number, color: string): void {
    this.parts.push(
      `<line x1="${MARGIN.left}" y1="${fmt(y)}" x2="${WIDTH - MARGIN.right}" y2="${fmt(y)}" ` +
        `stroke="${color}" stroke-dasharray="6,4"/>`,
    );
  }

  legend(entries: { label: string; color: string; dashed?: boolean }[]): void {
    const x = MARGIN.left + 10;
    let y = MARGIN.top + 8;
    for (const e of entries) {
      const dash = e.dashed ? ` stroke-dasharray="6,4"` : "";
      this.parts.push(
        `<line x1="${x}" y1="${y}" x2="${x + 22}" y2="${y}" stroke="${e.color}"${dash}/>`,
        `<text x="${x + 28}" y="${y + 4}">${escapeXml(e.label)}</text>`,
      );
      y += 16;
    }
  }

  annotation(text: string, line: number): void {
    const y = MARGIN.top + 8 + line * 16;
    this.parts.push(
      `<text x="${WIDTH - MARGIN.right - 6}" y="${y}" text-anchor="end">${escapeXml(text)}</text>`,
    );
  }

  render(): string {
    return this.parts.join("\n") + "\n</svg>\n";
  }
}
