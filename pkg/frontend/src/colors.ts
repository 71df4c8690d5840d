/**
 * Color tokens shared by the map and the narrative panels. The
 * invariant "each group's map color equals its narrative highlight
 * color" holds because both sides read the same token here.
 */

export const GROUP_COLORS: Record<string, string> = {
  positive: "#2166ac",
  negative: "#b2182b",
  outlier: "#e08214",
  high: "#1b7837",
  low: "#762a83",
  over: "#b2182b",
  under: "#2166ac",
  isolated: "#878787",
};

export const ZONE_COLORS = {
  diagonal: "#9e9e9e",
  above: "#2166ac",
  below: "#b2182b",
} as const;

export const NEUTRAL_FILL = "#d9d9d9";

/** Fill for regions passing the significance mask on a surface layer. */
export const SIGNIFICANT_FILL = "#4d9221";

/** Sequential single-hue ramp for quantile classes (light to dark). */
export function quantileColor(classIndex: number, k: number): string {
  const t = k <= 1 ? 1 : classIndex / (k - 1);
  const light = [239, 243, 255];
  const dark = [8, 69, 148];
  const mix = light.map((c, i) => Math.round(c + t * ((dark[i] ?? 0) - c)));
  return `rgb(${mix.join(",")})`;
}

/** Group token for a narrative paragraph id, e.g. "coef:x2:positive". */
export function paragraphGroup(paragraphId: string): string | null {
  const tail = paragraphId.split(":").pop() ?? "";
  if (tail in GROUP_COLORS) return tail;
  if (paragraphId.includes(":cluster:")) {
    return paragraphId.includes(":pos:") ? "positive" : "negative";
  }
  return null;
}
