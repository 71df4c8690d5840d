/**
 * Map legends. The bivariate legend is the k x k grid with the gray
 * diagonal, blue above (dependent class exceeds independent class),
 * and red below, matching the zone strings the service assigns.
 */

import type { ServiceNumber } from "./format.js";
import { fmt } from "./format.js";
import { ZONE_COLORS, quantileColor } from "./colors.js";

export function zoneOf(row: number, col: number): keyof typeof ZONE_COLORS {
  if (row === col) return "diagonal";
  return row > col ? "above" : "below";
}

/** k x k grid, dependent class on rows (bottom row = class 0). */
export function renderBivariateLegend(container: HTMLElement, k: number): void {
  container.replaceChildren();
  const grid = document.createElement("div");
  grid.className = "bivariate-legend";
  grid.style.display = "grid";
  grid.style.gridTemplateColumns = `repeat(${k}, 1rem)`;
  for (let r = k - 1; r >= 0; r--) {
    for (let c = 0; c < k; c++) {
      const zone = zoneOf(r, c);
      const cell = document.createElement("div");
      cell.className = "legend-cell";
      cell.dataset.row = String(r);
      cell.dataset.col = String(c);
      cell.dataset.zone = zone;
      cell.style.background = ZONE_COLORS[zone];
      cell.style.height = "1rem";
      grid.appendChild(cell);
    }
  }
  container.appendChild(grid);
}

export function renderQuantileLegend(
  container: HTMLElement,
  boundaries: ServiceNumber[],
): void {
  container.replaceChildren();
  const k = boundaries.length;
  const list = document.createElement("div");
  list.className = "quantile-legend";
  boundaries.forEach((bound, index) => {
    const row = document.createElement("div");
    row.className = "legend-row";
    const swatch = document.createElement("span");
    swatch.className = "legend-swatch";
    swatch.style.background = quantileColor(index, k);
    const label = document.createElement("span");
    label.textContent = `≤ ${fmt(bound)}`;
    row.append(swatch, label);
    list.appendChild(row);
  });
  container.appendChild(list);
}
