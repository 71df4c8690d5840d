/**
 * Diagnostics panel: indicator rows with served values, pop-over
 * explanations, and the coefficient (surface) list. Selecting an
 * indicator drives the map layer through the view reducer.
 */

import type { DiagnosticsResponse, ModelSummary } from "./api.js";
import type { ViewEvent } from "./viewstate.js";
import { fmt } from "./format.js";

export const INDICATORS = [
  "r2",
  "adj_r2",
  "aicc",
  "local_r2",
  "cooks_d",
  "std_residual",
  "morans_i",
  "significance",
] as const;

export type Indicator = (typeof INDICATORS)[number];

export function indicatorRowValue(
  indicator: Indicator,
  diag: DiagnosticsResponse,
): string {
  switch (indicator) {
    case "r2":
      return fmt(diag.r2);
    case "adj_r2":
      return fmt(diag.adj_r2);
    case "aicc":
      return fmt(diag.aicc);
    case "local_r2":
      return diag.local_r2.bandwidth_used === null
        ? ""
        : `bw ${fmt(diag.local_r2.bandwidth_used)}`;
    case "cooks_d":
      return `threshold ${fmt(diag.cooks_d.threshold)}`;
    case "std_residual":
      return diag.std_residuals.convention;
    case "morans_i":
      return `${fmt(diag.morans_i_residuals.statistic)} (p ${fmt(
        diag.morans_i_residuals.pseudo_p,
      )})`;
    case "significance":
      return `xi ${fmt(diag.significance.xi)}`;
  }
}

export class DiagnosticsPanel {
  readonly root: HTMLElement;

  constructor(
    container: HTMLElement,
    private dispatch: (event: ViewEvent) => void,
  ) {
    this.root = document.createElement("div");
    this.root.className = "diagnostics-panel";
    container.appendChild(this.root);
  }

  render(
    diag: DiagnosticsResponse,
    explanations: Record<string, string>,
    selected: string | null,
  ): void {
    this.root.replaceChildren();
    const list = document.createElement("ul");
    list.className = "indicator-list";
    for (const indicator of INDICATORS) {
      const row = document.createElement("li");
      row.className = "indicator-row";
      row.dataset.indicator = indicator;
      row.dataset.selected = String(indicator === selected);
      const name = document.createElement("span");
      name.className = "indicator-name";
      name.textContent = indicator;
      const value = document.createElement("span");
      value.className = "indicator-value";
      value.textContent = indicatorRowValue(indicator, diag);
      row.append(name, value);
      const explanation = explanations[indicator];
      if (explanation) {
        const pop = document.createElement("span");
        pop.className = "explanation-popover";
        pop.textContent = explanation;
        pop.hidden = true;
        const info = document.createElement("button");
        info.className = "explain";
        info.textContent = "?";
        info.addEventListener("click", (event) => {
          event.stopPropagation();
          pop.hidden = !pop.hidden;
        });
        row.append(info, pop);
      }
      row.addEventListener("click", () =>
        this.dispatch({ type: "select_indicator", indicator }),
      );
      list.appendChild(row);
    }
    this.root.appendChild(list);
  }

  renderSurfaceList(
    model: ModelSummary,
    surfaces: string[],
    selected: string | null,
  ): void {
    const list = document.createElement("ul");
    list.className = "surface-list";
    surfaces.forEach((surface, index) => {
      const row = document.createElement("li");
      row.className = "surface-row";
      row.dataset.surface = surface;
      row.dataset.selected = String(surface === selected);
      const enp = model.enp_per_surface[index];
      row.textContent =
        enp === undefined ? surface : `${surface} (enp ${fmt(enp)})`;
      row.addEventListener("click", () =>
        this.dispatch({ type: "select_surface", surface }),
      );
      list.appendChild(row);
    });
    this.root.appendChild(list);
  }
}

/** Region set an indicator selection narrows the map to. Pure lookup
 *  over served flags; regions stay untouched for global indicators. */
export function indicatorRegions(
  indicator: Indicator,
  diag: DiagnosticsResponse,
  surface: string | null,
): string[] | null {
  const ids = diag.region_ids;
  switch (indicator) {
    case "cooks_d":
      return ids.filter((_, i) => diag.cooks_d.mask[i]);
    case "local_r2":
      return ids.filter((_, i) => !diag.local_r2.undefined_flags[i]);
    case "std_residual":
      return ids.filter((_, i) => {
        const label = diag.std_residuals.labels[i];
        return label === "over" || label === "under";
      });
    case "significance": {
      if (surface === null) return null;
      const col = diag.significance.surfaces.indexOf(surface);
      if (col < 0) return null;
      return ids.filter((_, i) => diag.significance.mask[i]?.[col]);
    }
    default:
      return null;
  }
}
