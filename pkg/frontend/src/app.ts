/** DOM wiring: the New Analysis flow and the Reports explorer. */

import { ApiClient, ApiError } from "./api.js";
import {
  habitatTrendChart,
  importanceBoxplot,
  radarChart,
  responseCurveChart,
  rocChart,
  fittedHistogram,
} from "./charts.js";
import { exportableChart } from "./exporter.js";
import { renderLegendSvg, renderRasterSvg, rasterStats } from "./grid.js";
import { pollJob } from "./progress.js";
import {
  RequestSequencer,
  SessionState,
  buildConfigPayload,
  canRun,
  clampReportView,
  defaultReportView,
  emptySession,
} from "./state.js";
import {
  CV_METRICS,
  curvesByVariable,
  cvSeries,
  groupImportance,
  habitatTrends,
  histogramBins,
  metricsMap,
  renderValidationTable,
  rocPoints,
} from "./tables.js";
import type { Manifest } from "./types.js";

const $ = <T extends HTMLElement>(sel: string): T => {
  const el = document.querySelector(sel);
  if (!el) throw new Error(`missing element ${sel}`);
  return el as T;
};

interface StagedFile {
  path: string;
  file: File;
}

class App {
  private client = new ApiClient("");
  private state: SessionState = emptySession();
  private staged: StagedFile[] = [];
  private manifest: Manifest | null = null;
  private mapSeq = new RequestSequencer();

  mount(): void {
    $("#tab-new").onclick = () => this.showView("new");
    $("#tab-reports").onclick = () => this.showView("reports");
    $("#occ-files").onchange = (e) => this.addOccurrenceFiles(e);
    $("#fit-files").onchange = (e) => this.addLayerFiles(e, false);
    $("#proj-files").onchange = (e) => this.addLayerFiles(e, true);
    $<HTMLButtonElement>("#run").onclick = () => void this.validateAndRun();
    $("#load-job").onclick = () => {
      const id = $<HTMLInputElement>("#job-id-input").value.trim();
      if (id) void this.watchJob(id);
    };
    this.showView("new");
  }

  private banner(message: string): void {
    const el = $("#banner");
    el.textContent = message;
    el.classList.add("show");
    setTimeout(() => el.classList.remove("show"), 6000);
  }

  private showView(which: "new" | "reports" | "progress"): void {
    for (const id of ["view-new", "view-reports", "view-progress"]) {
      $(`#${id}`).classList.add("hidden");
    }
    $(`#view-${which === "progress" ? "progress" : which}`).classList.remove("hidden");
  }

  private markDirty(): void {
    this.state.validation = null;
    $<HTMLButtonElement>("#run").disabled = false;
    $("#validation-slot").innerHTML = "";
  }

  // ---- New Analysis -------------------------------------------------------

  private addOccurrenceFiles(event: Event): void {
    const input = event.target as HTMLInputElement;
    for (const file of input.files ?? []) {
      const path = `occ/${file.name}`;
      this.staged.push({ path, file });
      this.state.speciesOptions.push({
        file: path,
        variants: ["suitable_habitat"],
        standardize: true,
      });
    }
    this.renderSpeciesOptions();
    this.markDirty();
  }

  private guessLayer(name: string, projection: boolean) {
    const stem = name.replace(/\.asc$/i, "");
    const tokens = stem.split("_");
    const timestamp = /^\d+$/.test(tokens[tokens.length - 1]) ? tokens.pop()! : "0";
    let scenario: string | undefined;
    if (projection && tokens.length > 1) scenario = tokens.shift();
    return { variable: tokens.join("_") || stem, timestamp, scenario };
  }

  private addLayerFiles(event: Event, projection: boolean): void {
    const input = event.target as HTMLInputElement;
    for (const file of input.files ?? []) {
      const guess = this.guessLayer(file.name, projection);
      const path = `layers/${file.name}`;
      this.staged.push({ path, file });
      const entry = { ...guess, path };
      if (projection) this.state.projectionLayers.push(entry);
      else this.state.fittingLayers.push(entry);
    }
    this.renderLayerLists();
    this.markDirty();
  }

  private renderLayerLists(): void {
    const show = (layers: typeof this.state.fittingLayers) =>
      layers
        .map(
          (l) =>
            `<li>${l.scenario ? `<b>${l.scenario}</b> / ` : ""}${l.variable} @ ${l.timestamp}` +
            ` <code>${l.path}</code></li>`,
        )
        .join("");
    $("#fit-list").innerHTML = show(this.state.fittingLayers);
    $("#proj-list").innerHTML = show(this.state.projectionLayers);
  }

  private renderSpeciesOptions(): void {
    const variables = [...new Set(this.state.fittingLayers.map((l) => l.variable))];
    const slot = $("#species-options");
    slot.innerHTML = "";
    this.state.speciesOptions.forEach((sp, idx) => {
      const fieldset = document.createElement("fieldset");
      fieldset.innerHTML = `<legend>${sp.file}</legend>`;
      for (const variant of ["suitable_habitat", "native_range"]) {
        const label = document.createElement("label");
        const box = document.createElement("input");
        box.type = "checkbox";
        box.checked = sp.variants.includes(variant);
        box.onchange = () => {
          sp.variants = box.checked
            ? [...sp.variants, variant]
            : sp.variants.filter((v) => v !== variant);
          this.markDirty();
        };
        label.append(box, ` ${variant} `);
        fieldset.appendChild(label);
      }
      const predictors = document.createElement("label");
      predictors.append(" predictors: ");
      const select = document.createElement("select");
      select.multiple = true;
      select.size = Math.min(4, Math.max(2, variables.length));
      for (const variable of variables) {
        const option = document.createElement("option");
        option.value = variable;
        option.textContent = variable;
        option.selected = !sp.predictors || sp.predictors.includes(variable);
        select.appendChild(option);
      }
      select.onchange = () => {
        const chosen = [...select.selectedOptions].map((o) => o.value);
        sp.predictors = chosen.length === variables.length ? undefined : chosen;
        this.markDirty();
      };
      predictors.appendChild(select);
      fieldset.appendChild(predictors);

      const std = document.createElement("label");
      const stdBox = document.createElement("input");
      stdBox.type = "checkbox";
      stdBox.checked = sp.standardize;
      stdBox.onchange = () => {
        sp.standardize = stdBox.checked;
        this.markDirty();
      };
      std.append(stdBox, " standardize ");
      fieldset.appendChild(std);

      const remove = document.createElement("button");
      remove.textContent = "remove";
      remove.onclick = () => {
        this.state.speciesOptions.splice(idx, 1);
        this.renderSpeciesOptions();
        this.markDirty();
      };
      fieldset.appendChild(remove);
      slot.appendChild(fieldset);
    });
  }

  private async validateAndRun(): Promise<void> {
    const button = $<HTMLButtonElement>("#run");
    button.disabled = true;
    this.state.seed = Number($<HTMLInputElement>("#seed").value || "0");
    const config = buildConfigPayload(this.state);
    try {
      const draft = await this.client.submitJob(config, false);
      for (const { path, file } of this.staged) {
        await this.client.uploadFile(draft.id, path, file);
      }
      const started = await this.client.startJob(draft.id);
      this.state.validation = started.validation;
      $("#validation-slot").innerHTML = renderValidationTable(started.validation);
      await this.watchJob(draft.id);
    } catch (err) {
      if (err instanceof ApiError && err.validation.length) {
        this.state.validation = err.validation;
        $("#validation-slot").innerHTML = renderValidationTable(err.validation);
        button.disabled = !canRun(this.state.validation); // stays disabled on errors
      } else {
        this.banner(`submission failed: ${err}`);
        button.disabled = false;
      }
    }
  }

  private async watchJob(jobId: string): Promise<void> {
    this.state.jobId = jobId;
    this.showView("progress");
    const bar = $<HTMLProgressElement>("#progress-bar");
    const stage = $("#progress-stage");
    try {
      const final = await pollJob(
        this.client,
        jobId,
        (view) => {
          bar.value = view.progress;
          stage.textContent = `${view.state}: ${view.stage || "queued"}`;
        },
        { intervalMs: 1000 },
      );
      if (final.state === "failed") {
        this.banner(`job failed: ${final.error}`);
        this.showView("new");
        return;
      }
      this.manifest = await this.client.getManifest(jobId);
      this.state.report = defaultReportView(this.manifest);
      this.showView("reports");
      this.renderReports();
    } catch (err) {
      this.banner(`lost contact with the job: ${err}`);
      this.showView("new");
    }
  }

  // ---- Reports ------------------------------------------------------------

  private renderReports(): void {
    if (!this.manifest || !this.state.report) {
      $("#report-selectors").innerHTML = "<i>no finished job loaded</i>";
      return;
    }
    const manifest = this.manifest;
    const view = clampReportView(manifest, this.state.report);
    if (!view) return;
    this.state.report = view;
    const entry = manifest.species[view.species];
    const vm = entry.variants[view.variant];

    const selectors = $("#report-selectors");
    selectors.innerHTML = "";
    const mkSelect = (label: string, values: string[], current: string, onpick: (v: string) => void) => {
      const wrap = document.createElement("label");
      wrap.append(`${label}: `);
      const select = document.createElement("select");
      for (const v of values) {
        const option = document.createElement("option");
        option.value = option.textContent = v;
        option.selected = v === current;
        select.appendChild(option);
      }
      select.onchange = () => onpick(select.value);
      wrap.appendChild(select);
      selectors.appendChild(wrap);
    };
    mkSelect("species", Object.keys(manifest.species), view.species, (v) => {
      this.state.report = { ...view, species: v };
      this.renderReports();
    });
    mkSelect("variant", Object.keys(entry.variants), view.variant, (v) => {
      this.state.report = { ...view, variant: v };
      this.renderReports();
    });
    mkSelect("summary", Object.keys(vm.rasters[view.scenario][view.timestamp]), view.summary, (v) => {
      this.state.report = { ...view, summary: v };
      this.renderReports();
    });

    const tabs = $("#scenario-tabs");
    tabs.innerHTML = "";
    for (const scenario of Object.keys(vm.rasters)) {
      const button = document.createElement("button");
      button.textContent = scenario;
      button.className = scenario === view.scenario ? "tab active" : "tab";
      button.onclick = () => {
        this.state.report = { ...view, scenario };
        this.renderReports();
      };
      tabs.appendChild(button);
    }

    const timestamps = Object.keys(vm.rasters[view.scenario]).sort();
    const slider = $<HTMLInputElement>("#time-slider");
    slider.min = "0";
    slider.max = String(timestamps.length - 1);
    slider.value = String(Math.max(0, timestamps.indexOf(view.timestamp)));
    $("#time-label").textContent = view.timestamp;
    slider.oninput = () => {
      this.state.report = { ...view, timestamp: timestamps[Number(slider.value)] };
      this.renderReports();
    };

    void this.renderMap();
    void this.renderTrend();
    void this.renderDiagnostics();
  }

  private async renderMap(): Promise<void> {
    const view = this.state.report;
    const jobId = this.state.jobId;
    if (!view || !jobId) return;
    const token = this.mapSeq.next();
    try {
      const grid = await this.client.getRaster(jobId, {
        species: view.species,
        variant: view.variant,
        scenario: view.scenario,
        timestamp: view.timestamp,
        summary: view.summary,
      });
      if (!this.mapSeq.isCurrent(token)) return; // stale response
      const stats = rasterStats(grid);
      $("#map-slot").innerHTML =
        renderRasterSvg(grid) +
        `<div class="map-meta">${renderLegendSvg()}<span>` +
        `${view.summary} | ${stats.cells - stats.missing}/${stats.cells} cells | ` +
        `range ${(stats.min ?? 0).toFixed(3)} to ${(stats.max ?? 0).toFixed(3)}</span></div>`;
    } catch (err) {
      if (this.mapSeq.isCurrent(token)) this.banner(`map fetch failed: ${err}`);
    }
  }

  private async renderTrend(): Promise<void> {
    const view = this.state.report;
    const jobId = this.state.jobId;
    if (!view || !jobId) return;
    const slot = $("#trend-slot");
    try {
      const rows = await this.client.getTable(jobId, "habitat_area", {
        species: view.species,
        variant: view.variant,
      });
      slot.innerHTML = "";
      slot.appendChild(exportableChart(habitatTrendChart(habitatTrends(rows)), "habitat-trend"));
    } catch {
      slot.innerHTML = `<div class="not-computed">not computed</div>`;
    }
  }

  private async renderDiagnostics(): Promise<void> {
    const view = this.state.report;
    const jobId = this.state.jobId;
    if (!view || !jobId) return;
    const sel = { species: view.species, variant: view.variant };
    const slot = $("#diagnostics");
    slot.innerHTML = "";
    const panel = async (name: string, build: () => Promise<HTMLElement>) => {
      try {
        slot.appendChild(await build());
      } catch {
        const missing = document.createElement("div");
        missing.className = "not-computed";
        missing.textContent = `${name}: not computed`;
        slot.appendChild(missing);
      }
    };
    await panel("ROC", async () => {
      const [roc, metrics] = await Promise.all([
        this.client.getTable(jobId, "roc", sel),
        this.client.getTable(jobId, "metrics", sel),
      ]);
      const auc = metricsMap(metrics)["auc"] ?? 0;
      return exportableChart(rocChart(rocPoints(roc), auc), "roc");
    });
    await panel("fitted distribution", async () => {
      const rows = await this.client.getTable(jobId, "fitted_distribution", sel);
      return exportableChart(fittedHistogram(histogramBins(rows)), "fitted-distribution");
    });
    await panel("response curves", async () => {
      const rows = await this.client.getTable(jobId, "response_curves", sel);
      const curves = curvesByVariable(rows);
      const wrap = document.createElement("div");
      wrap.className = "curve-row";
      for (const [variable, points] of Object.entries(curves)) {
        wrap.appendChild(exportableChart(responseCurveChart(variable, points), `curve-${variable}`));
      }
      return wrap;
    });
    await panel("importance", async () => {
      const rows = await this.client.getTable(jobId, "importance", sel);
      return exportableChart(importanceBoxplot(groupImportance(rows)), "importance");
    });
    await panel("cross-validation", async () => {
      const rows = await this.client.getTable(jobId, "cv", sel);
      const { folds, mean } = cvSeries(rows);
      const series = [...folds.map((f) => ({ label: `fold ${f.label}`, values: f.values }))];
      if (mean) series.push({ label: "mean", values: mean.values });
      return exportableChart(radarChart([...CV_METRICS], series), "cv-radar");
    });
  }
}

new App().mount();
