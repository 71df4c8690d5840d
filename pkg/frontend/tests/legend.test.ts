import { describe, expect, it } from "vitest";

import { ZONE_COLORS, quantileColor } from "../src/colors.js";
import { fmt } from "../src/format.js";
import { renderBivariateLegend, renderQuantileLegend, zoneOf } from "../src/legend.js";
import { fixtures } from "./fakeService.js";

/** normalize a color through the style engine so hex and rgb compare */
function css(color: string): string {
  const probe = document.createElement("div");
  probe.style.background = color;
  return probe.style.background;
}

describe("zoneOf", () => {
  it("labels the diagonal and both off-diagonal triangles", () => {
    expect(zoneOf(0, 0)).toBe("diagonal");
    expect(zoneOf(2, 2)).toBe("diagonal");
    expect(zoneOf(2, 0)).toBe("above");
    expect(zoneOf(1, 0)).toBe("above");
    expect(zoneOf(0, 2)).toBe("below");
    expect(zoneOf(0, 1)).toBe("below");
  });
});

describe("renderBivariateLegend", () => {
  it("renders the full k x k grid for the served k", () => {
    const host = document.createElement("div");
    const k = (fixtures.bivariate as { k: number }).k;
    expect(k).toBe(3);
    renderBivariateLegend(host, k);
    const cells = host.querySelectorAll<HTMLElement>(".legend-cell");
    expect(cells.length).toBe(k * k);
    // every (row, col) pair appears exactly once
    const seen = new Set(
      [...cells].map((cell) => `${cell.dataset.row},${cell.dataset.col}`),
    );
    expect(seen.size).toBe(k * k);
  });

  it("colors the diagonal gray, above blue, below red", () => {
    const host = document.createElement("div");
    renderBivariateLegend(host, 3);
    for (const cell of host.querySelectorAll<HTMLElement>(".legend-cell")) {
      const row = Number(cell.dataset.row);
      const col = Number(cell.dataset.col);
      const zone = row === col ? "diagonal" : row > col ? "above" : "below";
      expect(cell.dataset.zone).toBe(zone);
      expect(cell.style.background).toBe(css(ZONE_COLORS[zone]));
    }
    const diagonal = host.querySelectorAll('[data-zone="diagonal"]');
    expect(diagonal.length).toBe(3);
  });

  it("paints class 0 in the bottom row (rows render top-down)", () => {
    const host = document.createElement("div");
    renderBivariateLegend(host, 3);
    const cells = host.querySelectorAll<HTMLElement>(".legend-cell");
    expect(cells[0]?.dataset.row).toBe("2");
    expect(cells[0]?.dataset.col).toBe("0");
    expect(cells[cells.length - 1]?.dataset.row).toBe("0");
    expect(cells[cells.length - 1]?.dataset.col).toBe("2");
  });

  it("scales to larger k", () => {
    const host = document.createElement("div");
    renderBivariateLegend(host, 5);
    expect(host.querySelectorAll(".legend-cell").length).toBe(25);
    expect(host.querySelectorAll('[data-zone="diagonal"]').length).toBe(5);
  });
});

describe("renderQuantileLegend", () => {
  it("lists one swatch per served boundary with the formatted bound", () => {
    const host = document.createElement("div");
    const boundaries = (fixtures.quantile as { boundaries: number[] }).boundaries;
    renderQuantileLegend(host, boundaries);
    const rows = host.querySelectorAll(".legend-row");
    expect(rows.length).toBe(boundaries.length);
    rows.forEach((row, index) => {
      const bound = boundaries[index];
      expect(bound).toBeDefined();
      expect(row.textContent).toBe(`≤ ${fmt(bound ?? 0)}`);
      const swatch = row.querySelector<HTMLElement>(".legend-swatch");
      expect(swatch?.style.background).toBe(
        css(quantileColor(index, boundaries.length)),
      );
    });
  });
});
