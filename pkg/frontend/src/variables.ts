/**
 * Variable assignment panel: feature list with histograms, drag (or
 * click) assignment into dependent / independent slots, and VIF
 * badges. Badge severity comes from the served `severe` flags; the
 * client never compares values against the threshold itself.
 */

import type { ApiClient, VifResponse } from "./api.js";
import type { ViewEvent } from "./viewstate.js";
import { fmt } from "./format.js";
import { renderHistogram } from "./histogram.js";

export const BADGE_OK = "#c7e9c0";
export const BADGE_WARN = "#ffeda0";

export function renderVifBadges(container: HTMLElement, vif: VifResponse): void {
  container.replaceChildren();
  vif.names.forEach((name, index) => {
    const badge = document.createElement("span");
    badge.className = "vif-badge";
    badge.dataset.variable = name;
    badge.dataset.severe = String(vif.severe[index] ?? false);
    badge.style.background = vif.severe[index] ? BADGE_WARN : BADGE_OK;
    const value = vif.values[index];
    badge.textContent = `${name} ${value === undefined ? "" : fmt(value)}`;
    container.appendChild(badge);
  });
}

export class VariablePanel {
  readonly root: HTMLElement;
  private listEl: HTMLElement;
  private dependentEl: HTMLElement;
  private independentsEl: HTMLElement;
  private badgesEl: HTMLElement;

  constructor(
    container: HTMLElement,
    private client: ApiClient,
    private dispatch: (event: ViewEvent) => void,
  ) {
    this.root = document.createElement("div");
    this.root.className = "variable-panel";
    this.listEl = document.createElement("ul");
    this.listEl.className = "feature-list";
    this.dependentEl = this.makeSlot("dependent");
    this.independentsEl = this.makeSlot("independent");
    this.badgesEl = document.createElement("div");
    this.badgesEl.className = "vif-badges";
    this.root.append(
      this.listEl,
      this.dependentEl,
      this.independentsEl,
      this.badgesEl,
    );
    container.appendChild(this.root);
  }

  private makeSlot(role: "dependent" | "independent"): HTMLElement {
    const slot = document.createElement("div");
    slot.className = `slot slot-${role}`;
    slot.dataset.role = role;
    slot.addEventListener("dragover", (event) => event.preventDefault());
    slot.addEventListener("drop", (event) => {
      event.preventDefault();
      const name = (event as DragEvent).dataTransfer?.getData("text/plain");
      if (name) this.dispatch({ type: "assign_variable", role, name });
    });
    return slot;
  }

  async renderFeatures(columns: string[]): Promise<void> {
    this.listEl.replaceChildren();
    for (const name of columns) {
      const item = document.createElement("li");
      item.className = "feature-item";
      item.dataset.variable = name;
      item.draggable = true;
      item.addEventListener("dragstart", (event) => {
        (event as DragEvent).dataTransfer?.setData("text/plain", name);
      });
      const label = document.createElement("span");
      label.textContent = name;
      item.appendChild(label);
      for (const role of ["dependent", "independent"] as const) {
        const btn = document.createElement("button");
        btn.textContent = role === "dependent" ? "as dependent" : "as independent";
        btn.dataset.assign = role;
        btn.addEventListener("click", () =>
          this.dispatch({ type: "assign_variable", role, name }),
        );
        item.appendChild(btn);
      }
      const histo = document.createElement("div");
      histo.className = "feature-histogram";
      item.appendChild(histo);
      this.listEl.appendChild(item);
      const profile = await this.client.featureProfile(name);
      renderHistogram(histo, profile);
    }
  }

  renderAssignments(dependent: string | null, independents: string[]): void {
    this.dependentEl.textContent = dependent ?? "drop dependent variable";
    this.independentsEl.replaceChildren();
    for (const name of independents) {
      const chip = document.createElement("span");
      chip.className = "assigned";
      chip.textContent = name;
      const remove = document.createElement("button");
      remove.textContent = "remove";
      remove.addEventListener("click", () =>
        this.dispatch({ type: "unassign_variable", name }),
      );
      chip.appendChild(remove);
      this.independentsEl.appendChild(chip);
    }
  }

  async refreshVif(independents: string[]): Promise<void> {
    if (independents.length < 2) {
      this.badgesEl.replaceChildren();
      return;
    }
    const vif = await this.client.vif(independents);
    renderVifBadges(this.badgesEl, vif);
  }
}
