/**
 * Report authoring panel: served report items with reorder / edit /
 * delete controls, export download, and state save / load buttons.
 * Every mutation round-trips through the service.
 */

import type { ApiClient, ReportJson } from "./api.js";

function download(blob: Blob, filename: string): void {
  const link = document.createElement("a");
  link.href = URL.createObjectURL(blob);
  link.download = filename;
  link.click();
  URL.revokeObjectURL(link.href);
}

export class ReportPanel {
  readonly root: HTMLElement;
  private itemsEl: HTMLElement;
  private statusEl: HTMLElement;

  constructor(
    container: HTMLElement,
    private client: ApiClient,
    private onChange: (report: ReportJson) => void = () => {},
  ) {
    this.root = document.createElement("div");
    this.root.className = "report-panel";
    this.itemsEl = document.createElement("ol");
    this.itemsEl.className = "report-items";
    this.statusEl = document.createElement("div");
    this.statusEl.className = "report-status";
    const controls = document.createElement("div");
    controls.className = "report-controls";
    controls.append(
      this.button("export report", () => this.export()),
      this.button("save state", () => this.saveState()),
      this.loadControl(),
    );
    this.root.append(this.itemsEl, controls, this.statusEl);
    container.appendChild(this.root);
  }

  private button(label: string, onClick: () => void): HTMLButtonElement {
    const btn = document.createElement("button");
    btn.textContent = label;
    btn.addEventListener("click", onClick);
    return btn;
  }

  private loadControl(): HTMLElement {
    const wrap = document.createElement("label");
    wrap.className = "state-load";
    wrap.textContent = "load state";
    const input = document.createElement("input");
    input.type = "file";
    input.accept = "application/json";
    input.addEventListener("change", () => {
      const file = input.files?.[0];
      if (!file) return;
      void file.text().then(async (text) => {
        const summary = await this.client.stateLoad(text);
        this.statusEl.textContent = `state loaded: ${JSON.stringify(summary)}`;
      });
    });
    wrap.appendChild(input);
    return wrap;
  }

  render(report: ReportJson): void {
    this.itemsEl.replaceChildren();
    report.items.forEach((item, index) => {
      const row = document.createElement("li");
      row.className = `report-item kind-${item.kind}`;
      row.dataset.index = String(index);
      const content = document.createElement("span");
      content.className = "item-content";
      content.textContent = item.content;
      row.appendChild(content);
      row.append(
        this.mutateButton("up", "move_up", index),
        this.mutateButton("down", "move_down", index),
        this.mutateButton("delete", "delete", index),
      );
      this.itemsEl.appendChild(row);
    });
  }

  private mutateButton(
    label: string,
    action: "move_up" | "move_down" | "delete",
    index: number,
  ): HTMLButtonElement {
    return this.button(label, () => {
      void this.client.mutateReport(action, { index }).then((report) => {
        this.render(report);
        this.onChange(report);
      });
    });
  }

  async addParagraph(content: string, sourceModule = "narrative"): Promise<void> {
    const report = await this.client.mutateReport("add", {
      item: { kind: "paragraph", content, source_module: sourceModule },
    });
    this.render(report);
    this.onChange(report);
  }

  private async export(): Promise<void> {
    download(await this.client.reportExport(), "report.html");
  }

  private async saveState(): Promise<void> {
    download(await this.client.stateSave(), "analysis-state.json");
  }
}
