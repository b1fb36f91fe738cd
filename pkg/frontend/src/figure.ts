/** Minimal deterministic SVG figure builder: grouped bars, lines, axes. */

export interface BarGroup {
  label: string;
  values: (number | null)[]; // one per series, null = missing
}

export interface BarPanel {
  type: "bars";
  title: string;
  groups: BarGroup[];
  series: string[];
  yLabel: string;
  refLine?: number; // horizontal reference (the oracle floor)
  yMax?: number; // clip overly tall bars; clipped bars are hatched at the top
  logY?: boolean;
}

export interface LineSeries {
  label: string;
  x: number[];
  y: number[];
  color?: string;
  dashed?: boolean;
}

export interface LinePanel {
  type: "lines";
  title: string;
  series: LineSeries[];
  yLabel: string;
  xLabel: string;
  logY?: boolean;
}

export type Panel = BarPanel | LinePanel;

export const SERIES_COLORS = [
  "#4c72b0",
  "#dd8452",
  "#55a868",
  "#c44e52",
  "#8172b3",
  "#937860",
];

const PANEL_W = 320;
const PANEL_H = 240;
const MARGIN = { top: 34, right: 12, bottom: 44, left: 58 };

function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

function fmt(x: number): string {
  if (!Number.isFinite(x)) return "";
  if (x === 0) return "0";
  const ax = Math.abs(x);
  if (ax >= 1000 || ax < 0.01) return x.toExponential(1);
  return Number(x.toPrecision(3)).toString();
}

function niceTicks(lo: number, hi: number, n = 5): number[] {
  if (!(hi > lo)) hi = lo + 1;
  const span = hi - lo;
  const step = Math.pow(10, Math.floor(Math.log10(span / n)));
  const candidates = [step, 2 * step, 2.5 * step, 5 * step, 10 * step];
  const chosen = candidates.find((s) => span / s <= n) ?? 10 * step;
  const ticks: number[] = [];
  for (let v = Math.ceil(lo / chosen) * chosen; v <= hi + 1e-12 * span; v += chosen) {
    ticks.push(Number(v.toPrecision(12)));
  }
  return ticks;
}

class SvgBuilder {
  private parts: string[] = [];

  add(s: string): void {
    this.parts.push(s);
  }

  line(x1: number, y1: number, x2: number, y2: number, stroke: string, width = 1, dash?: string): void {
    const d = dash ? ` stroke-dasharray="${dash}"` : "";
    this.add(
      `<line x1="${fmt(x1)}" y1="${fmt(y1)}" x2="${fmt(x2)}" y2="${fmt(y2)}" stroke="${stroke}" stroke-width="${width}"${d}/>`,
    );
  }

  rect(x: number, y: number, w: number, h: number, fill: string): void {
    this.add(`<rect x="${fmt(x)}" y="${fmt(y)}" width="${fmt(w)}" height="${fmt(h)}" fill="${fill}"/>`);
  }

  text(x: number, y: number, s: string, size = 11, anchor = "middle", fill = "#222", rotate?: number): void {
    const t = rotate !== undefined ? ` transform="rotate(${rotate} ${fmt(x)} ${fmt(y)})"` : "";
    this.add(
      `<text x="${fmt(x)}" y="${fmt(y)}" font-size="${size}" font-family="Helvetica, Arial, sans-serif" text-anchor="${anchor}" fill="${fill}"${t}>${esc(s)}</text>`,
    );
  }

  path(d: string, stroke: string, width = 1.4, dash?: string): void {
    const dd = dash ? ` stroke-dasharray="${dash}"` : "";
    this.add(`<path d="${d}" fill="none" stroke="${stroke}" stroke-width="${width}"${dd}/>`);
  }

  toString(): string {
    return this.parts.join("\n");
  }
}

interface Scale {
  (v: number): number;
}

function makeYScale(lo: number, hi: number, logY: boolean | undefined, innerH: number): { scale: Scale; lo: number; hi: number } {
  if (logY) {
    const llo = Math.log10(Math.max(lo, 1e-12));
    const lhi = Math.log10(Math.max(hi, lo * 10));
    return {
      scale: (v) => innerH - ((Math.log10(Math.max(v, 1e-12)) - llo) / (lhi - llo)) * innerH,
      lo: llo,
      hi: lhi,
    };
  }
  return { scale: (v) => innerH - ((v - lo) / (hi - lo)) * innerH, lo, hi };
}

function drawBarPanel(svg: SvgBuilder, panel: BarPanel, x0: number, y0: number): void {
  const innerW = PANEL_W - MARGIN.left - MARGIN.right;
  const innerH = PANEL_H - MARGIN.top - MARGIN.bottom;
  const ox = x0 + MARGIN.left;
  const oy = y0 + MARGIN.top;

  const values = panel.groups.flatMap((g) => g.values.filter((v): v is number => v !== null && Number.isFinite(v)));
  let hi = values.length ? Math.max(...values, panel.refLine ?? -Infinity) : 1;
  if (panel.yMax !== undefined) hi = Math.min(hi, panel.yMax);
  hi *= 1.08;
  const lo = 0;
  const { scale } = makeYScale(lo, hi, false, innerH);

  svg.text(x0 + PANEL_W / 2, y0 + 16, panel.title, 12, "middle");
  svg.line(ox, oy, ox, oy + innerH, "#444");
  svg.line(ox, oy + innerH, ox + innerW, oy + innerH, "#444");
  for (const tick of niceTicks(lo, hi)) {
    const ty = oy + scale(tick);
    svg.line(ox - 3, ty, ox, ty, "#444");
    svg.line(ox, ty, ox + innerW, ty, "#eee");
    svg.text(ox - 6, ty + 3.5, fmt(tick), 9, "end", "#444");
  }
  svg.text(x0 + 14, y0 + PANEL_H / 2, panel.yLabel, 10, "middle", "#222", -90);

  const nGroups = panel.groups.length;
  const nSeries = panel.series.length;
  const groupW = innerW / Math.max(nGroups, 1);
  const barW = (groupW * 0.8) / Math.max(nSeries, 1);
  panel.groups.forEach((group, gi) => {
    const gx = ox + gi * groupW + groupW * 0.1;
    group.values.forEach((value, si) => {
      if (value === null || !Number.isFinite(value)) return;
      const clipped = value > hi;
      const v = Math.min(value, hi);
      const by = oy + scale(v);
      svg.rect(gx + si * barW, by, barW * 0.92, oy + innerH - by, SERIES_COLORS[si % SERIES_COLORS.length]);
      if (clipped) {
        svg.text(gx + si * barW + barW * 0.46, by - 2, "^", 9, "middle", "#555");
      }
    });
    svg.text(gx + groupW * 0.4, oy + innerH + 14, group.label, 10, "middle", "#222");
  });
  if (panel.refLine !== undefined && panel.refLine <= hi) {
    const ry = oy + scale(panel.refLine);
    svg.line(ox, ry, ox + innerW, ry, "#000", 1, "4 3");
  }
}

function drawLinePanel(svg: SvgBuilder, panel: LinePanel, x0: number, y0: number): void {
  const innerW = PANEL_W - MARGIN.left - MARGIN.right;
  const innerH = PANEL_H - MARGIN.top - MARGIN.bottom;
  const ox = x0 + MARGIN.left;
  const oy = y0 + MARGIN.top;

  const xs = panel.series.flatMap((s) => s.x);
  const ys = panel.series.flatMap((s) => s.y).filter((v) => Number.isFinite(v));
  const xlo = Math.min(...xs);
  const xhi = Math.max(...xs);
  let ylo = Math.min(...ys);
  let yhi = Math.max(...ys);
  if (!(yhi > ylo)) {
    yhi = ylo + 1;
    ylo -= 1;
  }
  const pad = 0.06 * (yhi - ylo);
  const { scale } = makeYScale(ylo - pad, yhi + pad, panel.logY, innerH);
  const sx: Scale = (v) => ((v - xlo) / Math.max(xhi - xlo, 1e-12)) * innerW;

  svg.text(x0 + PANEL_W / 2, y0 + 16, panel.title, 12, "middle");
  svg.line(ox, oy, ox, oy + innerH, "#444");
  svg.line(ox, oy + innerH, ox + innerW, oy + innerH, "#444");
  for (const tick of niceTicks(ylo - pad, yhi + pad)) {
    const ty = oy + scale(tick);
    if (ty < oy - 1 || ty > oy + innerH + 1) continue;
    svg.line(ox - 3, ty, ox, ty, "#444");
    svg.line(ox, ty, ox + innerW, ty, "#eee");
    svg.text(ox - 6, ty + 3.5, fmt(tick), 9, "end", "#444");
  }
  for (const tick of niceTicks(xlo, xhi, 6)) {
    const tx = ox + sx(tick);
    svg.line(tx, oy + innerH, tx, oy + innerH + 3, "#444");
    svg.text(tx, oy + innerH + 14, fmt(tick), 9, "middle", "#444");
  }
  svg.text(x0 + 14, y0 + PANEL_H / 2, panel.yLabel, 10, "middle", "#222", -90);
  svg.text(x0 + PANEL_W / 2, y0 + PANEL_H - 6, panel.xLabel, 10, "middle", "#222");

  panel.series.forEach((s, si) => {
    const color = s.color ?? SERIES_COLORS[si % SERIES_COLORS.length];
    const d = s.x
      .map((xv, i) => `${i === 0 ? "M" : "L"}${fmt(ox + sx(xv))} ${fmt(oy + scale(s.y[i]))}`)
      .join(" ");
    svg.path(d, color, 1.4, s.dashed ? "5 3" : undefined);
  });
}

export interface Figure {
  panels: Panel[];
  columns: number;
  legend?: { labels: string[]; dashedLast?: boolean };
  caption?: string;
}

export function renderFigureSvg(figure: Figure): string {
  const rows = Math.ceil(figure.panels.length / figure.columns);
  const legendH = figure.legend ? 26 : 0;
  const captionH = figure.caption ? 18 : 0;
  const width = figure.columns * PANEL_W;
  const height = rows * PANEL_H + legendH + captionH;
  const svg = new SvgBuilder();
  svg.rect(0, 0, width, height, "#ffffff");
  figure.panels.forEach((panel, i) => {
    const x0 = (i % figure.columns) * PANEL_W;
    const y0 = Math.floor(i / figure.columns) * PANEL_H + legendH;
    if (panel.type === "bars") drawBarPanel(svg, panel, x0, y0);
    else drawLinePanel(svg, panel, x0, y0);
  });
  if (figure.legend) {
    let lx = 16;
    figure.legend.labels.forEach((label, i) => {
      svg.rect(lx, 9, 12, 12, SERIES_COLORS[i % SERIES_COLORS.length]);
      svg.text(lx + 16, 19, label, 11, "start");
      lx += 26 + label.length * 6.4;
    });
  }
  if (figure.caption) {
    svg.text(width / 2, height - 5, figure.caption, 10, "middle", "#555");
  }
  return [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}">`,
    svg.toString(),
    "</svg>",
  ].join("\n");
}
