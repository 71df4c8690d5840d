/**
 * Tiny SVG histogram drawn from a served feature profile. Bin edges
 * and counts come from the service; no local binning.
 */

import type { FeatureProfile } from "./api.js";
import { fmt } from "./format.js";

const SVG_NS = "http://www.w3.org/2000/svg";

export function renderHistogram(
  container: HTMLElement,
  profile: FeatureProfile,
  width = 120,
  height = 36,
): void {
  const svg = document.createElementNS(SVG_NS, "svg");
  svg.setAttribute("viewBox", `0 0 ${width} ${height}`);
  svg.setAttribute("class", "histogram");
  const counts = profile.counts;
  const peak = Math.max(1, ...counts);
  const barWidth = width / Math.max(1, counts.length);
  counts.forEach((count, index) => {
    const bar = document.createElementNS(SVG_NS, "rect");
    const h = (count / peak) * height;
    bar.setAttribute("x", (index * barWidth).toFixed(2));
    bar.setAttribute("y", (height - h).toFixed(2));
    bar.setAttribute("width", Math.max(0.5, barWidth - 0.5).toFixed(2));
    bar.setAttribute("height", h.toFixed(2));
    bar.setAttribute("fill", "#6baed6");
    const title = document.createElementNS(SVG_NS, "title");
    title.textContent = `${count}`;
    bar.appendChild(title);
    svg.appendChild(bar);
  });
  const caption = document.createElement("div");
  caption.className = "histogram-range";
  caption.textContent = `${fmt(profile.minimum)} to ${fmt(profile.maximum)}`;
  container.append(svg, caption);
}
