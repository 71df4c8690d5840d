/**
 * Display formatting for values received from the service.
 *
 * The service encodes non-finite floats as the JSON string tokens
 * "NaN" / "Infinity" / "-Infinity"; everything else arrives as a
 * plain number. The UI never computes statistics, so this module is
 * the only place numbers are turned into text.
 */

export type ServiceNumber = number | "NaN" | "Infinity" | "-Infinity";

export function isToken(v: unknown): v is "NaN" | "Infinity" | "-Infinity" {
  return v === "NaN" || v === "Infinity" || v === "-Infinity";
}

export function asNumber(v: ServiceNumber): number {
  if (typeof v === "number") return v;
  if (v === "NaN") return NaN;
  return v === "Infinity" ? Infinity : -Infinity;
}

/** Human form of a served value: tokens become words, numbers get
 *  up to four significant digits with trailing zeros trimmed. */
export function fmt(v: ServiceNumber): string {
  if (isToken(v)) return v === "NaN" ? "undefined" : "infinite";
  if (!Number.isFinite(v)) return v !== v ? "undefined" : "infinite";
  if (Number.isInteger(v) && Math.abs(v) < 1e15) return String(v);
  const p = v.toPrecision(4);
  return p.includes("e") ? p : String(Number(p));
}
