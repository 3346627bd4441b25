/** Table-payload adapters and the validation-table renderer. */

import type {
  CurvePoint,
  HistogramBin,
  ImportanceGroup,
  RocPoint,
  TrendPoint,
} from "./charts.js";
import type { TableRecord, ValidationRow } from "./types.js";

const esc = (s: string) =>
  s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");

const num = (r: TableRecord, key: string): number | null => {
  const raw = r[key];
  if (raw === null || raw === undefined || raw === "") return null;
  const v = Number(raw);
  return Number.isFinite(v) ? v : null;
};

/** Validation table rows -> HTML with one row class per status. */
export function renderValidationTable(rows: ValidationRow[]): string {
  const body = rows
    .map(
      (r) =>
        `<tr class="status-${r.status}" data-status="${r.status}">` +
        `<td class="badge">${r.status}</td>` +
        `<td>${esc(r.item)}</td><td>${esc(r.check)}</td><td>${esc(r.message)}</td></tr>`,
    )
    .join("");
  return (
    `<table class="validation"><thead>` +
    `<tr><th>status</th><th>item</th><th>check</th><th>message</th></tr>` +
    `</thead><tbody>${body}</tbody></table>`
  );
}

export const rocPoints = (records: TableRecord[]): RocPoint[] =>
  records.map((r) => ({ fpr: num(r, "fpr") ?? 0, tpr: num(r, "tpr") ?? 0 }));

export const metricsMap = (records: TableRecord[]): Record<string, number | null> => {
  const out: Record<string, number | null> = {};
  for (const r of records) {
    if (r["metric"]) out[String(r["metric"])] = num(r, "value");
  }
  return out;
};

export const histogramBins = (records: TableRecord[]): HistogramBin[] =>
  records.map((r) => ({
    left: num(r, "bin_left") ?? 0,
    right: num(r, "bin_right") ?? 0,
    presence: num(r, "presence_count") ?? 0,
    absence: num(r, "absence_count") ?? 0,
  }));

export function curvesByVariable(records: TableRecord[]): Record<string, CurvePoint[]> {
  const out: Record<string, CurvePoint[]> = {};
  for (const r of records) {
    const variable = String(r["variable"]);
    (out[variable] ??= []).push({
      grid: num(r, "grid_value") ?? 0,
      mean: num(r, "mean") ?? 0,
      lower: num(r, "lower") ?? 0,
      upper: num(r, "upper") ?? 0,
    });
  }
  return out;
}

/**
 * Importance iterations grouped by variable, preserving the row order
 * of the exported table (which is sorted by mean importance,
 * descending) so the boxplot matches the export exactly.
 */
export function groupImportance(records: TableRecord[]): ImportanceGroup[] {
  const order: string[] = [];
  const values: Record<string, number[]> = {};
  for (const r of records) {
    const variable = String(r["variable"]);
    if (!(variable in values)) {
      order.push(variable);
      values[variable] = [];
    }
    const v = num(r, "importance");
    if (v !== null) values[variable].push(v);
  }
  return order.map((variable) => ({ variable, values: values[variable] }));
}

/** Mean-descending variable order (ties keep first appearance). */
export function importanceOrder(groups: ImportanceGroup[]): string[] {
  const mean = (vs: number[]) => vs.reduce((a, b) => a + b, 0) / Math.max(1, vs.length);
  return [...groups]
    .map((g, i) => ({ g, i, m: mean(g.values) }))
    .sort((a, b) => b.m - a.m || a.i - b.i)
    .map((x) => x.g.variable);
}

export const CV_METRICS = [
  "auc",
  "tss",
  "f_score",
  "sensitivity",
  "specificity",
  "precision",
  "accuracy",
] as const;

export interface CvRows {
  folds: { label: string; values: number[] }[];
  mean: { label: string; values: number[] } | null;
}

/** Radar inputs: one series per fold plus the mean row; axes = CV_METRICS. */
export function cvSeries(records: TableRecord[]): CvRows {
  const folds: CvRows["folds"] = [];
  let mean: CvRows["mean"] = null;
  for (const r of records) {
    const label = String(r["fold"]);
    const values = CV_METRICS.map((k) => num(r, k) ?? 0);
    if (label === "mean") mean = { label, values };
    else folds.push({ label, values });
  }
  return { folds, mean };
}

export function habitatTrends(records: TableRecord[]): Record<string, TrendPoint[]> {
  const out: Record<string, TrendPoint[]> = {};
  for (const r of records) {
    const scenario = String(r["scenario"]);
    (out[scenario] ??= []).push({
      timestamp: String(r["timestamp"]),
      area: num(r, "area") ?? 0,
      percentChange: num(r, "percent_change"),
    });
  }
  return out;
}
