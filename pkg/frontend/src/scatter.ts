/**
 * Scatterplot and scatterplot matrix over raw dataset values pulled
 * from the served GeoJSON properties. Correlation highlights use the
 * served `flagged_strong` flags.
 */

import type { CorrelationPair, GeoJson } from "./api.js";
import { fmt } from "./format.js";

const SVG_NS = "http://www.w3.org/2000/svg";

export function columnValues(geojson: GeoJson, name: string): number[] {
  return geojson.features.map((f) => Number(f.properties[name]));
}

function extent(values: number[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (Number.isFinite(v)) {
      lo = Math.min(lo, v);
      hi = Math.max(hi, v);
    }
  }
  if (!Number.isFinite(lo)) return [0, 1];
  return lo === hi ? [lo - 1, hi + 1] : [lo, hi];
}

export function renderScatter(
  container: HTMLElement,
  xs: number[],
  ys: number[],
  size = 100,
): SVGSVGElement {
  const svg = document.createElementNS(SVG_NS, "svg");
  svg.setAttribute("viewBox", `0 0 ${size} ${size}`);
  svg.setAttribute("class", "scatter");
  const [x0, x1] = extent(xs);
  const [y0, y1] = extent(ys);
  const n = Math.min(xs.length, ys.length);
  for (let i = 0; i < n; i++) {
    const x = xs[i];
    const y = ys[i];
    if (x === undefined || y === undefined) continue;
    const dot = document.createElementNS(SVG_NS, "circle");
    dot.setAttribute("cx", (((x - x0) / (x1 - x0)) * size).toFixed(2));
    dot.setAttribute("cy", (size - ((y - y0) / (y1 - y0)) * size).toFixed(2));
    dot.setAttribute("r", "1.2");
    dot.setAttribute("fill", "#3182bd");
    dot.setAttribute("fill-opacity", "0.6");
    svg.appendChild(dot);
  }
  container.appendChild(svg);
  return svg;
}

/** Pairwise matrix; cells whose pair is flagged strong get a red frame
 *  and show the served r value. */
export function renderScatterMatrix(
  container: HTMLElement,
  geojson: GeoJson,
  names: string[],
  pairs: CorrelationPair[],
): void {
  container.replaceChildren();
  const matrix = document.createElement("div");
  matrix.className = "scatter-matrix";
  matrix.style.display = "grid";
  matrix.style.gridTemplateColumns = `repeat(${names.length}, max-content)`;
  const byPair = new Map<string, CorrelationPair>();
  for (const pair of pairs) {
    byPair.set(`${pair.x_name}|${pair.y_name}`, pair);
    byPair.set(`${pair.y_name}|${pair.x_name}`, pair);
  }
  for (const rowName of names) {
    for (const colName of names) {
      const cell = document.createElement("div");
      cell.className = "matrix-cell";
      cell.dataset.x = colName;
      cell.dataset.y = rowName;
      if (rowName === colName) {
        cell.textContent = rowName;
      } else {
        renderScatter(
          cell,
          columnValues(geojson, colName),
          columnValues(geojson, rowName),
          60,
        );
        const pair = byPair.get(`${colName}|${rowName}`);
        if (pair) {
          const label = document.createElement("span");
          label.className = "corr-label";
          label.textContent = `r ${fmt(pair.r)}`;
          cell.appendChild(label);
          if (pair.flagged_strong) {
            cell.dataset.strong = "true";
            cell.style.outline = "2px solid #b2182b";
          }
        }
      }
      matrix.appendChild(cell);
    }
  }
  container.appendChild(matrix);
}
