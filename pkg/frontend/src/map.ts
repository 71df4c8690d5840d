/**
 * SVG choropleth. Regions come from the dataset GeoJSON; classes,
 * values, and masks all come from service responses. The map owns no
 * data transformation beyond linear projection into the viewBox.
 */

import type { GeoJson, GeoJsonFeature } from "./api.js";
import { NEUTRAL_FILL } from "./colors.js";

const SVG_NS = "http://www.w3.org/2000/svg";
const VIEW = 100;

type Ring = number[][];

function rings(feature: GeoJsonFeature): Ring[] {
  const geom = feature.geometry;
  if (geom.type === "Polygon") {
    return geom.coordinates as Ring[];
  }
  return (geom.coordinates as Ring[][]).flat();
}

function featureId(feature: GeoJsonFeature, index: number): string {
  if (feature.id !== undefined && feature.id !== null) return String(feature.id);
  const props = feature.properties ?? {};
  for (const key of ["region_id", "GEOID"]) {
    if (key in props) return String(props[key]);
  }
  return String(index);
}

export class ChoroplethMap {
  readonly svg: SVGSVGElement;
  private paths = new Map<string, SVGPathElement>();
  private order: string[] = [];

  constructor(container: HTMLElement) {
    this.svg = document.createElementNS(SVG_NS, "svg");
    this.svg.setAttribute("viewBox", `0 0 ${VIEW} ${VIEW}`);
    this.svg.setAttribute("class", "choropleth");
    container.appendChild(this.svg);
  }

  /**
   * Rebuild paths from the dataset geometry. When `regionIds` is given
   * (the summary's row-ordered ids) features bind to it positionally,
   * so map ids always agree with the ids the service responds with.
   */
  setGeoJson(geojson: GeoJson, regionIds?: string[]): void {
    this.svg.replaceChildren();
    this.paths.clear();
    this.order = [];
    let minX = Infinity;
    let minY = Infinity;
    let maxX = -Infinity;
    let maxY = -Infinity;
    for (const feature of geojson.features) {
      for (const ring of rings(feature)) {
        for (const [x, y] of ring as [number, number][]) {
          minX = Math.min(minX, x);
          maxX = Math.max(maxX, x);
          minY = Math.min(minY, y);
          maxY = Math.max(maxY, y);
        }
      }
    }
    const spanX = maxX - minX || 1;
    const spanY = maxY - minY || 1;
    const scale = VIEW / Math.max(spanX, spanY);
    const px = (x: number) => (x - minX) * scale;
    const py = (y: number) => VIEW - (y - minY) * scale; // lat grows upward

    geojson.features.forEach((feature, index) => {
      const id = regionIds?.[index] ?? featureId(feature, index);
      const d = rings(feature)
        .map(
          (ring) =>
            "M" +
            ring
              .map(([x, y]) => `${px(x as number).toFixed(2)},${py(y as number).toFixed(2)}`)
              .join("L") +
            "Z",
        )
        .join("");
      const path = document.createElementNS(SVG_NS, "path");
      path.setAttribute("d", d);
      path.setAttribute("fill", NEUTRAL_FILL);
      path.setAttribute("data-region-id", id);
      this.svg.appendChild(path);
      this.paths.set(id, path);
      this.order.push(id);
    });
  }

  regionIds(): string[] {
    return [...this.order];
  }

  /** Paint per-region fills; regions not in the map are ignored. */
  setFills(fills: Map<string, string>): void {
    for (const [id, path] of this.paths) {
      path.setAttribute("fill", fills.get(id) ?? NEUTRAL_FILL);
    }
  }

  resetFills(): void {
    for (const path of this.paths.values()) {
      path.setAttribute("fill", NEUTRAL_FILL);
    }
  }

  /** Render only the given regions (indicator layers such as outliers). */
  showOnly(regionIds: Iterable<string> | null): void {
    const visible = regionIds === null ? null : new Set(regionIds);
    for (const [id, path] of this.paths) {
      const show = visible === null || visible.has(id);
      path.setAttribute("data-hidden", show ? "false" : "true");
      path.style.display = show ? "" : "none";
    }
  }

  /** Hover filtering: dim everything outside the anchor set. */
  filterTo(regionIds: Iterable<string> | null): void {
    const keep = regionIds === null ? null : new Set(regionIds);
    for (const [id, path] of this.paths) {
      const inSet = keep === null || keep.has(id);
      path.setAttribute("data-filtered", inSet ? "false" : "true");
      path.style.opacity = inSet ? "1" : "0.12";
    }
  }

  /** Region ids currently rendered (not hidden by showOnly). */
  visibleRegions(): string[] {
    return this.order.filter(
      (id) => this.paths.get(id)?.getAttribute("data-hidden") !== "true",
    );
  }

  /** Region ids currently at full opacity (not dimmed by filterTo). */
  focusedRegions(): string[] {
    return this.order.filter(
      (id) => this.paths.get(id)?.getAttribute("data-filtered") !== "true",
    );
  }
}
