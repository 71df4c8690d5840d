/**
 * Application controller: two coordinated-multiple-view screens over
 * the analysis service. All interaction flows through one reducer;
 * this class owns the side effects (fetches and re-renders) that each
 * accepted event triggers.
 */

import {
  ApiClient,
  ApiError,
  type DiagnosticsResponse,
  type GeoJson,
  type ModelSummary,
  type NarrativeDocJson,
  type ReportJson,
} from "./api.js";
import {
  GROUP_COLORS,
  NEUTRAL_FILL,
  SIGNIFICANT_FILL,
  ZONE_COLORS,
  quantileColor,
} from "./colors.js";
import {
  DiagnosticsPanel,
  INDICATORS,
  type Indicator,
  indicatorRegions,
} from "./diagnostics.js";
import { renderBivariateLegend, renderQuantileLegend } from "./legend.js";
import { ChoroplethMap } from "./map.js";
import { NarrativePanel } from "./narrative.js";
import { pollJob } from "./jobs.js";
import { ReportPanel } from "./report.js";
import { renderScatterMatrix } from "./scatter.js";
import { VariablePanel } from "./variables.js";
import {
  type ServerSnapshot,
  type ViewEvent,
  type ViewState,
  coordinateViews,
  initialViewState,
} from "./viewstate.js";

export class App {
  state: ViewState = initialViewState();
  snapshot: ServerSnapshot = {
    columns: [],
    surfaces: [],
    indicators: [...INDICATORS],
    paragraphIds: [],
    regionIds: [],
    modelEpoch: null,
  };

  readonly map: ChoroplethMap;
  readonly variables: VariablePanel;
  readonly diagnosticsPanel: DiagnosticsPanel;
  readonly narrative: NarrativePanel;
  readonly report: ReportPanel;

  private configScreen: HTMLElement;
  private analysisScreen: HTMLElement;
  private noticeEl: HTMLElement;
  private legendEl: HTMLElement;
  private matrixEl: HTMLElement;
  private geojson: GeoJson | null = null;
  private pending: Promise<void> = Promise.resolve();
  private model: ModelSummary | null = null;
  private diagnostics: DiagnosticsResponse | null = null;
  private explanations: Record<string, string> = {};
  private currentDoc: { key: string; doc: NarrativeDocJson } | null = null;

  constructor(
    root: HTMLElement,
    private client: ApiClient,
  ) {
    this.noticeEl = document.createElement("div");
    this.noticeEl.className = "notice";
    this.noticeEl.hidden = true;

    const nav = document.createElement("nav");
    for (const screen of ["configuration", "analysis"] as const) {
      const btn = document.createElement("button");
      btn.textContent = screen;
      btn.dataset.screen = screen;
      btn.addEventListener("click", () =>
        this.dispatch({ type: "switch_screen", screen }),
      );
      nav.appendChild(btn);
    }

    this.configScreen = document.createElement("section");
    this.configScreen.className = "screen screen-configuration";
    this.analysisScreen = document.createElement("section");
    this.analysisScreen.className = "screen screen-analysis";
    this.analysisScreen.hidden = true;

    root.append(this.noticeEl, nav, this.configScreen, this.analysisScreen);

    this.variables = new VariablePanel(this.configScreen, client, (e) =>
      this.dispatch(e),
    );
    this.matrixEl = document.createElement("div");
    this.matrixEl.className = "matrix-container";
    const trainBtn = document.createElement("button");
    trainBtn.className = "train";
    trainBtn.textContent = "train model";
    trainBtn.addEventListener("click", () => void this.train());
    this.configScreen.append(this.matrixEl, trainBtn);

    const mapWrap = document.createElement("div");
    mapWrap.className = "map-container";
    this.legendEl = document.createElement("div");
    this.legendEl.className = "legend-container";
    this.map = new ChoroplethMap(mapWrap);
    this.analysisScreen.append(mapWrap, this.legendEl);
    this.diagnosticsPanel = new DiagnosticsPanel(this.analysisScreen, (e) =>
      this.dispatch(e),
    );
    this.narrative = new NarrativePanel(this.analysisScreen, client, (e) =>
      this.dispatch(e),
    );
    this.report = new ReportPanel(this.analysisScreen, client);
  }

  async boot(): Promise<void> {
    const summary = await this.client.datasetSummary();
    this.snapshot.columns = summary.columns;
    this.snapshot.regionIds = summary.region_ids;
    this.geojson = await this.client.datasetGeoJson();
    this.map.setGeoJson(this.geojson, summary.region_ids);
    await this.variables.renderFeatures(summary.columns);
    try {
      await this.refreshModelViews();
    } catch (error) {
      if (!(error instanceof ApiError && error.status === 404)) throw error;
    }
    this.renderChrome();
  }

  dispatch(event: ViewEvent): void {
    const before = this.state;
    this.state = coordinateViews(before, event, this.snapshot);
    this.pending = this.pending.then(() => this.applyEffects(before, event));
  }

  /** resolves once every effect queued by dispatch() has finished */
  async settle(): Promise<void> {
    await this.pending;
  }

  private async applyEffects(before: ViewState, event: ViewEvent): Promise<void> {
    const state = this.state;
    switch (event.type) {
      case "switch_screen":
        break;
      case "assign_variable":
      case "unassign_variable":
        this.variables.renderAssignments(state.dependent, state.independents);
        await this.variables.refreshVif(state.independents);
        await this.refreshMatrix();
        await this.refreshBivariate();
        break;
      case "select_indicator":
        await this.renderIndicatorLayer();
        break;
      case "select_surface":
        if (state.surface !== null && state.surface !== before.surface) {
          await this.renderSurfaceViews(state.surface);
        }
        break;
      case "hover_paragraph":
        this.map.filterTo(
          state.hoveredParagraph === null
            ? null
            : this.narrative.anchorsOf(state.hoveredParagraph),
        );
        break;
      case "click_paragraph": {
        const pid = state.keyphraseParagraph;
        if (pid !== null) {
          const doc = this.currentDoc?.doc;
          const para = doc?.paragraphs.find((p) => p.paragraph_id === pid);
          if (para && para.keyphrase_regions.length > 0) {
            this.narrative.renderKeyphrases(
              await this.client.keyphrases(para.keyphrase_regions),
            );
          }
        }
        break;
      }
      case "retrained":
        if (state !== before) {
          // selections were reset; clear the layers derived from them
          this.map.showOnly(null);
          this.map.filterTo(null);
          this.map.resetFills();
          await this.refreshModelViews();
        }
        break;
      default:
        break;
    }
    this.renderChrome();
  }

  private renderChrome(): void {
    this.noticeEl.hidden = this.state.notice === null;
    this.noticeEl.textContent = this.state.notice ?? "";
    this.configScreen.hidden = this.state.screen !== "configuration";
    this.analysisScreen.hidden = this.state.screen !== "analysis";
  }

  private async refreshMatrix(): Promise<void> {
    const names = [
      ...(this.state.dependent ? [this.state.dependent] : []),
      ...this.state.independents,
    ];
    if (names.length < 2 || this.geojson === null) return;
    const corr = await this.client.correlations(names);
    renderScatterMatrix(this.matrixEl, this.geojson, names, corr.results);
  }

  private async refreshBivariate(): Promise<void> {
    const dep = this.state.dependent;
    const ind = this.state.independents[0];
    if (!dep || !ind) return;
    const classes = await this.client.classifyBivariate(dep, ind, 3);
    renderBivariateLegend(this.legendEl, classes.k);
    const fills = new Map<string, string>();
    classes.region_ids.forEach((id, i) => {
      const zone = classes.zones[i];
      if (zone) fills.set(id, ZONE_COLORS[zone]);
    });
    this.map.setFills(fills);
  }

  async showQuantile(column: string, k = 5): Promise<void> {
    const classes = await this.client.classifyQuantile(column, k);
    renderQuantileLegend(this.legendEl, classes.boundaries);
    const fills = new Map<string, string>();
    classes.region_ids.forEach((id, i) => {
      const cls = classes.classes[i];
      if (cls !== undefined) {
        fills.set(id, quantileColor(cls, classes.k_effective));
      }
    });
    this.map.setFills(fills);
  }

  async train(): Promise<void> {
    const dependent = this.state.dependent;
    if (!dependent || this.state.independents.length === 0) return;
    const job = await this.client.submitJob({
      dependent,
      independents: this.state.independents,
      family: "gwr",
    });
    const done = await pollJob(this.client, job.job_id);
    this.dispatch({ type: "retrained", epoch: done.job_id });
  }

  private async refreshModelViews(): Promise<void> {
    this.model = await this.client.model();
    const surfaces = await this.client.surfaces();
    this.snapshot.surfaces = surfaces.surfaces;
    this.diagnostics = await this.client.diagnostics();
    this.explanations = await this.client.explanations();
    this.snapshot.modelEpoch = this.state.epoch;
    this.diagnosticsPanel.render(
      this.diagnostics,
      this.explanations,
      this.state.indicator,
    );
    this.diagnosticsPanel.renderSurfaceList(
      this.model,
      surfaces.surfaces,
      this.state.surface,
    );
  }

  private async renderIndicatorLayer(): Promise<void> {
    if (this.diagnostics === null) return;
    const indicator = this.state.indicator as Indicator | null;
    this.diagnosticsPanel.render(
      this.diagnostics,
      this.explanations,
      indicator,
    );
    if (this.model !== null) {
      this.diagnosticsPanel.renderSurfaceList(
        this.model,
        this.snapshot.surfaces,
        this.state.surface,
      );
    }
    if (indicator === null) {
      this.map.showOnly(null);
      this.map.resetFills();
      return;
    }
    const regions = indicatorRegions(indicator, this.diagnostics, this.state.surface);
    this.map.showOnly(regions);
    const fills = new Map<string, string>();
    if (indicator === "cooks_d") {
      for (const id of regions ?? []) {
        fills.set(id, GROUP_COLORS["outlier"] ?? NEUTRAL_FILL);
      }
    } else if (indicator === "std_residual") {
      this.diagnostics.region_ids.forEach((id, i) => {
        const label = this.diagnostics?.std_residuals.labels[i];
        if (label === "over" || label === "under") {
          fills.set(id, GROUP_COLORS[label] ?? NEUTRAL_FILL);
        }
      });
    } else if (indicator === "significance") {
      for (const id of regions ?? []) {
        fills.set(id, SIGNIFICANT_FILL);
      }
    } else if (indicator === "local_r2") {
      // clamped values are already in [0, 1]; lerp the served value
      this.diagnostics.region_ids.forEach((id, i) => {
        const value = this.diagnostics?.local_r2.clamped[i];
        if (typeof value === "number") {
          fills.set(id, quantileColor(Math.round(value * 8), 9));
        }
      });
    }
    if (fills.size > 0) this.map.setFills(fills);
  }

  private async renderSurfaceViews(surface: string): Promise<void> {
    const clusters = await this.client.clusters(surface);
    const doc = await this.client.narrativeCoefficient(surface);
    const docKey = `coef:${surface}`;
    this.currentDoc = { key: docKey, doc };
    this.snapshot.paragraphIds = doc.paragraphs.map((p) => p.paragraph_id);
    this.narrative.render(doc, docKey);
    const fills = new Map<string, string>();
    for (const cluster of [
      ...clusters.positive_clusters,
      ...clusters.negative_clusters,
    ]) {
      for (const id of cluster.region_ids) {
        fills.set(id, GROUP_COLORS[cluster.sign] ?? NEUTRAL_FILL);
      }
    }
    for (const id of clusters.isolated) {
      fills.set(id, GROUP_COLORS["isolated"] ?? NEUTRAL_FILL);
    }
    this.map.showOnly(null);
    this.map.setFills(fills);
  }

  async openReport(title: string): Promise<ReportJson> {
    const report = await this.client.createReport(title);
    this.report.render(report);
    return report;
  }
}
