/** Session state, report-view selection rules, and stale-fetch guards. */

import type { Manifest, SpeciesOptions, AnalysisConfigDoc, ValidationRow } from "./types.js";

export interface UploadedLayer {
  variable: string;
  timestamp: string;
  path: string; // path within the job workspace
  scenario?: string; // absent = fitting layer
}

export interface ReportView {
  species: string;
  variant: string;
  scenario: string;
  timestamp: string;
  summary: string;
}

export interface SessionState {
  speciesOptions: SpeciesOptions[];
  fittingLayers: UploadedLayer[];
  projectionLayers: UploadedLayer[];
  seed: number;
  sampler: Record<string, number>;
  evaluation: { cv: boolean; importance: boolean; response_curves: boolean };
  validation: ValidationRow[] | null;
  jobId: string | null;
  report: ReportView | null;
}

export const emptySession = (): SessionState => ({
  speciesOptions: [],
  fittingLayers: [],
  projectionLayers: [],
  seed: 0,
  sampler: {},
  evaluation: { cv: true, importance: true, response_curves: true },
  validation: null,
  jobId: null,
  report: null,
});

/** Run is allowed only when a validation pass produced no error rows. */
export const canRun = (rows: ValidationRow[] | null): boolean =>
  rows !== null && !rows.some((r) => r.status === "error");

/** Assemble the config payload submitted to the service. */
export function buildConfigPayload(state: SessionState): AnalysisConfigDoc {
  const fitting: AnalysisConfigDoc["fitting_layers"] = {};
  for (const layer of state.fittingLayers) {
    (fitting[layer.variable] ??= {})[layer.timestamp] = layer.path;
  }
  const projection: AnalysisConfigDoc["projection_layers"] = {};
  for (const layer of state.projectionLayers) {
    if (!layer.scenario) continue;
    ((projection[layer.scenario] ??= {})[layer.timestamp] ??= {})[layer.variable] = layer.path;
  }
  return {
    config_version: 1,
    seed: state.seed,
    species: state.speciesOptions.map((sp) => ({
      ...sp,
      variants: [...sp.variants],
      predictors: sp.predictors ? [...sp.predictors] : undefined,
    })),
    fitting_layers: fitting,
    projection_layers: projection,
    sampler: { ...state.sampler },
    evaluation: { ...state.evaluation },
  };
}

/** First report view available in a manifest (ok species only). */
export function defaultReportView(manifest: Manifest): ReportView | null {
  for (const [species, entry] of Object.entries(manifest.species)) {
    if (entry.status !== "ok") continue;
    for (const [variant, vm] of Object.entries(entry.variants)) {
      const scenarios = Object.keys(vm.rasters);
      if (!scenarios.length) continue;
      const scenario = scenarios[0];
      const timestamps = Object.keys(vm.rasters[scenario]);
      return { species, variant, scenario, timestamp: timestamps[0], summary: "mean" };
    }
  }
  return null;
}

/** Clamp a view so every key refers to something the manifest contains. */
export function clampReportView(manifest: Manifest, view: ReportView): ReportView | null {
  const entry = manifest.species[view.species];
  if (!entry || entry.status !== "ok") return defaultReportView(manifest);
  const vm = entry.variants[view.variant] ?? Object.values(entry.variants)[0];
  if (!vm) return defaultReportView(manifest);
  const variant = entry.variants[view.variant] ? view.variant : Object.keys(entry.variants)[0];
  const scenarios = Object.keys(vm.rasters);
  if (!scenarios.length) return defaultReportView(manifest);
  const scenario = vm.rasters[view.scenario] ? view.scenario : scenarios[0];
  const timestamps = Object.keys(vm.rasters[scenario]);
  const timestamp = vm.rasters[scenario][view.timestamp] ? view.timestamp : timestamps[0];
  const summary = vm.rasters[scenario][timestamp][view.summary] ? view.summary : "mean";
  return { species: view.species, variant, scenario, timestamp, summary };
}

/**
 * Per-panel fetch sequencing: responses arriving out of order are
 * dropped, so at most the latest request updates a panel.
 */
export class RequestSequencer {
  private seq = 0;

  next(): number {
    return ++this.seq;
  }

  isCurrent(token: number): boolean {
    return token === this.seq;
  }
}
