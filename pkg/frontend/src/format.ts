// Shared formatters. The intercept tests format the raw service payloads with
// these same functions, so "displayed number equals payload number" is checked
// through one code path.

export const DASH = "\u2014";

export function fmtInt(v: number | null | undefined): string {
  return v == null ? DASH : Math.round(v).toLocaleString("en-US");
}

export function fmtNum(v: number | null | undefined, digits = 2): string {
  return v == null ? DASH : v.toFixed(digits);
}

export function fmtTimes(v: number | null | undefined, digits = 2): string {
  return v == null ? DASH : `×${v.toFixed(digits)}`;
}

export function fmtPct(v: number | null | undefined): string {
  return v == null ? DASH : `${v.toFixed(1)}%`;
}

export function fmtQs(v: number): string {
  return v.toPrecision(4);
}

export function fmtTokensPerS(v: number | null | undefined): string {
  return v == null ? DASH : `${Math.round(v).toLocaleString("en-US")} tok/s`;
}

export function fmtDelta(base: number | null, cur: number | null, digits = 2): string {
  if (base == null || cur == null) return DASH;
  const d = cur - base;
  const s = d.toFixed(digits);
  return d > 0 ? `+${s}` : s;
}

/** 131072 -> "128k", 16777216 -> "16384k"; matches the service's row labels. */
export function contextLabel(c: number): string {
  return `${Math.round(c / 1024)}k`;
}
