/** SVG chart builders for the diagnostics panels.

 * Every builder is a pure function from already-computed numbers to an
 * SVG string; the only arithmetic here is axis scaling and boxplot
 * order statistics of the provided raw iteration values.
 */

import { extent, linearScale } from "./scale.js";

const W = 340;
const H = 260;
const M = { top: 18, right: 12, bottom: 34, left: 44 };

const esc = (s: string) =>
  s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");

function frame(body: string, title: string, width = W, height = H): string {
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${width} ${height}"` +
    ` width="${width}" height="${height}" class="chart" role="img">` +
    `<text x="${width / 2}" y="12" text-anchor="middle" font-size="12" font-weight="bold">` +
    `${esc(title)}</text>` +
    body +
    `</svg>`
  );
}

function axes(xLabel: string, yLabel: string, xTicks: string[], yTicks: string[]): string {
  const x0 = M.left;
  const x1 = W - M.right;
  const y0 = H - M.bottom;
  const y1 = M.top;
  const ticksX = xTicks
    .map((t, i) => {
      const x = x0 + ((x1 - x0) * i) / Math.max(1, xTicks.length - 1);
      return `<text x="${x}" y="${y0 + 14}" text-anchor="middle" font-size="9">${esc(t)}</text>`;
    })
    .join("");
  const ticksY = yTicks
    .map((t, i) => {
      const y = y0 - ((y0 - y1) * i) / Math.max(1, yTicks.length - 1);
      return `<text x="${x0 - 6}" y="${y + 3}" text-anchor="end" font-size="9">${esc(t)}</text>`;
    })
    .join("");
  return (
    `<line x1="${x0}" y1="${y0}" x2="${x1}" y2="${y0}" stroke="#555"/>` +
    `<line x1="${x0}" y1="${y0}" x2="${x0}" y2="${y1}" stroke="#555"/>` +
    ticksX +
    ticksY +
    `<text x="${(x0 + x1) / 2}" y="${H - 6}" text-anchor="middle" font-size="10">${esc(xLabel)}</text>` +
    `<text x="12" y="${(y0 + y1) / 2}" text-anchor="middle" font-size="10"` +
    ` transform="rotate(-90 12 ${(y0 + y1) / 2})">${esc(yLabel)}</text>`
  );
}

const plotScales = (xd: [number, number], yd: [number, number]) =>
  [
    linearScale(xd, [M.left, W - M.right]),
    linearScale(yd, [H - M.bottom, M.top]),
  ] as const;

export interface RocPoint {
  fpr: number;
  tpr: number;
}

export function rocChart(points: RocPoint[], auc: number): string {
  const [sx, sy] = plotScales([0, 1], [0, 1]);
  const path = points.map((p) => `${sx(p.fpr)},${sy(p.tpr)}`).join(" ");
  const body =
    axes("false positive rate", "true positive rate", ["0", "0.5", "1"], ["0", "0.5", "1"]) +
    `<line x1="${sx(0)}" y1="${sy(0)}" x2="${sx(1)}" y2="${sy(1)}" stroke="#bbb" stroke-dasharray="4 3"/>` +
    `<polyline points="${path}" fill="none" stroke="#2166ac" stroke-width="2"/>` +
    `<text x="${sx(0.62)}" y="${sy(0.08)}" font-size="11">AUC = ${auc.toFixed(3)}</text>`;
  return frame(body, "ROC curve");
}

export interface HistogramBin {
  left: number;
  right: number;
  presence: number;
  absence: number;
}

export function fittedHistogram(bins: HistogramBin[]): string {
  const peak = Math.max(1, ...bins.map((b) => Math.max(b.presence, b.absence)));
  const [sx, sy] = plotScales([0, 1], [0, peak]);
  const bars = bins
    .map((b) => {
      const x = sx(b.left);
      const w = Math.max(1, sx(b.right) - sx(b.left));
      const half = w / 2;
      return (
        `<rect x="${x}" y="${sy(b.absence)}" width="${half}" height="${sy(0) - sy(b.absence)}"` +
        ` fill="#b2182b" opacity="0.75"><title>absences: ${b.absence}</title></rect>` +
        `<rect x="${x + half}" y="${sy(b.presence)}" width="${half}" height="${sy(0) - sy(b.presence)}"` +
        ` fill="#2166ac" opacity="0.75"><title>presences: ${b.presence}</title></rect>`
      );
    })
    .join("");
  const legend =
    `<rect x="${W - 118}" y="${M.top}" width="9" height="9" fill="#2166ac"/>` +
    `<text x="${W - 105}" y="${M.top + 8}" font-size="9">presence</text>` +
    `<rect x="${W - 118}" y="${M.top + 13}" width="9" height="9" fill="#b2182b"/>` +
    `<text x="${W - 105}" y="${M.top + 21}" font-size="9">absence</text>`;
  const body =
    axes("mean fitted probability", "count", ["0", "0.5", "1"], ["0", String(peak)]) + bars + legend;
  return frame(body, "Fitted values by class");
}

export interface CurvePoint {
  grid: number;
  mean: number;
  lower: number;
  upper: number;
}

export function responseCurveChart(variable: string, points: CurvePoint[]): string {
  const xd = extent(points.map((p) => p.grid));
  const [sx, sy] = plotScales(xd, [0, 1]);
  const band =
    points.map((p) => `${sx(p.grid)},${sy(p.upper)}`).join(" ") +
    " " +
    [...points].reverse().map((p) => `${sx(p.grid)},${sy(p.lower)}`).join(" ");
  const line = points.map((p) => `${sx(p.grid)},${sy(p.mean)}`).join(" ");
  const body =
    axes(variable, "P(presence)", [xd[0].toFixed(1), xd[1].toFixed(1)], ["0", "0.5", "1"]) +
    `<polygon points="${band}" fill="#2166ac" opacity="0.22"/>` +
    `<polyline points="${line}" fill="none" stroke="#2166ac" stroke-width="2"/>`;
  return frame(body, `Response curve: ${variable}`);
}

export interface ImportanceGroup {
  variable: string;
  values: number[];
}

/** Order statistics for box glyphs (display only; metrics come from the API). */
export function boxStats(values: number[]) {
  const sorted = [...values].sort((a, b) => a - b);
  const q = (p: number) => sorted[Math.max(0, Math.ceil(p * sorted.length) - 1)];
  return { lo: sorted[0], q1: q(0.25), median: q(0.5), q3: q(0.75), hi: sorted[sorted.length - 1] };
}

export function importanceBoxplot(groups: ImportanceGroup[]): string {
  const all = groups.flatMap((g) => g.values);
  const [lo, hi] = extent(all);
  const pad = (hi - lo || 1) * 0.1;
  const [, sy] = plotScales([0, 1], [Math.min(0, lo - pad), hi + pad]);
  const x0 = M.left;
  const step = (W - M.right - x0) / Math.max(1, groups.length);
  const boxes = groups
    .map((g, i) => {
      const cx = x0 + step * (i + 0.5);
      const bw = Math.min(34, step * 0.5);
      const s = boxStats(g.values);
      return (
        `<g data-variable="${esc(g.variable)}">` +
        `<line x1="${cx}" y1="${sy(s.lo)}" x2="${cx}" y2="${sy(s.hi)}" stroke="#333"/>` +
        `<rect x="${cx - bw / 2}" y="${sy(s.q3)}" width="${bw}" height="${Math.max(1, sy(s.q1) - sy(s.q3))}"` +
        ` fill="#74add1" stroke="#333"/>` +
        `<line x1="${cx - bw / 2}" y1="${sy(s.median)}" x2="${cx + bw / 2}" y2="${sy(s.median)}"` +
        ` stroke="#111" stroke-width="2"/>` +
        `<text x="${cx}" y="${H - M.bottom + 14}" text-anchor="middle" font-size="9">${esc(g.variable)}</text>` +
        `</g>`
      );
    })
    .join("");
  const zero = `<line x1="${x0}" y1="${sy(0)}" x2="${W - M.right}" y2="${sy(0)}" stroke="#999" stroke-dasharray="3 3"/>`;
  const body =
    axes("", "F-score drop", [], [(Math.min(0, lo - pad)).toFixed(2), (hi + pad).toFixed(2)]) +
    zero +
    boxes;
  return frame(body, "Permutation importance (10 iterations)");
}

export interface RadarSeries {
  label: string;
  values: number[]; // one value per axis, already in [0, 1]
}

export function radarChart(axesLabels: string[], series: RadarSeries[]): string {
  const cx = W / 2;
  const cy = H / 2 + 8;
  const radius = Math.min(W, H) / 2 - 46;
  const angle = (i: number) => (Math.PI * 2 * i) / axesLabels.length - Math.PI / 2;
  const point = (i: number, r: number) =>
    `${cx + Math.cos(angle(i)) * r},${cy + Math.sin(angle(i)) * r}`;
  const rings = [0.25, 0.5, 0.75, 1]
    .map((f) => {
      const ring = axesLabels.map((_, i) => point(i, radius * f)).join(" ");
      return `<polygon points="${ring}" fill="none" stroke="#ddd"/>`;
    })
    .join("");
  const spokes = axesLabels
    .map((label, i) => {
      const [x, y] = point(i, radius + 16).split(",").map(Number);
      return (
        `<line x1="${cx}" y1="${cy}" x2="${point(i, radius)}" stroke="#ccc"/>` +
        `<text x="${x}" y="${y}" text-anchor="middle" font-size="9">${esc(label)}</text>`
      );
    })
    .join("");
  const palette = ["#9ecae1", "#a1d99b", "#bcbddc", "#fdae6b", "#c6dbef", "#2166ac"];
  const polys = series
    .map((s, k) => {
      const pts = s.values
        .map((v, i) => point(i, radius * Math.min(1, Math.max(0, v))))
        .join(" ");
      const main = s.label === "mean";
      const color = main ? "#b2182b" : palette[k % palette.length];
      return (
        `<polygon points="${pts}" fill="${color}" fill-opacity="${main ? 0.25 : 0.08}"` +
        ` stroke="${color}" stroke-width="${main ? 2 : 1}" data-series="${esc(s.label)}"/>`
      );
    })
    .join("");
  return frame(rings + spokes + polys, "Cross-validation metrics", W, H);
}

export interface TrendPoint {
  timestamp: string;
  area: number;
  percentChange: number | null;
}

export function habitatTrendChart(series: Record<string, TrendPoint[]>): string {
  const everything = Object.values(series).flat();
  if (!everything.length) return frame("", "Suitable habitat area");
  const timestamps = [...new Set(everything.map((p) => p.timestamp))].sort();
  const [alo, ahi] = extent(everything.map((p) => p.area));
  const pad = (ahi - alo || 1) * 0.15;
  const sx = linearScale([0, Math.max(1, timestamps.length - 1)], [M.left, W - M.right]);
  const sy = linearScale([Math.max(0, alo - pad), ahi + pad], [H - M.bottom, M.top]);
  const palette = ["#2166ac", "#b2182b", "#1a9850", "#762a83"];
  const lines = Object.entries(series)
    .map(([name, points], k) => {
      const color = palette[k % palette.length];
      const sorted = [...points].sort((a, b) => a.timestamp.localeCompare(b.timestamp));
      const path = sorted
        .map((p) => `${sx(timestamps.indexOf(p.timestamp))},${sy(p.area)}`)
        .join(" ");
      const last = sorted[sorted.length - 1];
      const label =
        last.percentChange === null ? name : `${name} (${last.percentChange.toFixed(1)}%)`;
      return (
        `<polyline points="${path}" fill="none" stroke="${color}" stroke-width="2" data-scenario="${esc(name)}"/>` +
        `<text x="${W - M.right}" y="${sy(last.area) - 4}" text-anchor="end" font-size="9"` +
        ` fill="${color}">${esc(label)}</text>`
      );
    })
    .join("");
  const body =
    axes("time step", "weighted area", timestamps, [
      Math.max(0, alo - pad).toFixed(1),
      (ahi + pad).toFixed(1),
    ]) + lines;
  return frame(body, "Suitable habitat area");
}
