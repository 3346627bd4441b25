/** Payload shapes of the job service API (see docs/api_schema.json). */

export type ValidationStatus = "ok" | "warning" | "error";

export interface ValidationRow {
  item: string;
  check: string;
  status: ValidationStatus;
  message: string;
}

export type JobState = "pending" | "running" | "done" | "failed";

export interface JobView {
  id: string;
  state: JobState;
  stage: string;
  progress: number;
  created: number | null;
  started: number | null;
  finished: number | null;
  error: string | null;
  validation: ValidationRow[];
}

export interface SubmitResponse {
  id: string;
  state: JobState;
  validation: ValidationRow[];
}

/** Raster payload: row-major values, null marks a missing cell. */
export interface RasterGrid {
  n_rows: number;
  n_cols: number;
  x_ll: number;
  y_ll: number;
  cell_size: number;
  values: (number | null)[][];
}

export type SummaryName = "mean" | "median" | "q025" | "q975" | "binary";

/** Per-variant manifest entry; raster paths keyed scenario -> timestamp -> summary. */
export interface VariantManifest {
  model: string;
  tables: Record<string, string>;
  rasters: Record<string, Record<string, Record<string, string>>>;
}

export interface SpeciesManifest {
  status: "ok" | "failed";
  prefix: string;
  error?: string;
  tables: Record<string, string>;
  variants: Record<string, VariantManifest>;
  timing?: string;
}

export interface Manifest {
  format: string;
  version: number;
  seed: number;
  species: Record<string, SpeciesManifest>;
  files: Record<string, string>;
  diagnostics: string[];
}

/** CSV tables fetched with format=json arrive as one record per row. */
export type TableRecord = Record<string, string | null>;

/** Config document built by the New Analysis form (mirrors the YAML schema). */
export interface SpeciesOptions {
  file: string;
  name?: string;
  variants: string[];
  predictors?: string[];
  standardize: boolean;
  thinning_decimals?: number | null;
}

export interface AnalysisConfigDoc {
  config_version: number;
  seed: number;
  species: SpeciesOptions[];
  fitting_layers: Record<string, Record<string, string>>;
  projection_layers: Record<string, Record<string, Record<string, string>>>;
  study_area?: string;
  sampler: Record<string, number>;
  evaluation: { cv: boolean; importance: boolean; response_curves: boolean };
}
