/** Pure geometry for the inline-SVG charts: correlation curve, metric
 * timelines, and the gaze-target ribbon. No DOM access here. */

import type { GazeRow } from "./types.js";

export type Scale = (value: number) => number;

/** Linear map from [d0, d1] onto [r0, r1]; a degenerate domain maps to the
 * range midpoint. */
export function linearScale(d0: number, d1: number, r0: number, r1: number): Scale {
  const span = d1 - d0;
  if (span === 0) return () => (r0 + r1) / 2;
  return (value: number) => r0 + ((value - d0) / span) * (r1 - r0);
}

export function extent(values: number[]): [number, number] {
  if (values.length === 0) return [0, 1];
  let lo = values[0]!;
  let hi = values[0]!;
  for (const v of values) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  return [lo, hi];
}

/** SVG polyline `points` attribute for paired samples; points with
 * null/missing y are skipped. */
export function polylinePoints(
  xs: number[],
  ys: (number | null)[],
  sx: Scale,
  sy: Scale,
  precision = 2,
): string {
  const parts: string[] = [];
  for (let i = 0; i < xs.length; i++) {
    const y = ys[i];
    if (y === null || y === undefined) continue;
    parts.push(`${sx(xs[i]!).toFixed(precision)},${sy(y).toFixed(precision)}`);
  }
  return parts.join(" ");
}

export interface RibbonSegment {
  startNs: number;
  endNs: number;
  target: string;
}

/** Merge consecutive samples with equal targets into contiguous segments.
 * Each sample covers up to the next sample's timestamp; the last one extends
 * by the median step so it stays visible. */
export function ribbonSegments(rows: Pick<GazeRow, "timestamp_ns" | "target">[]): RibbonSegment[] {
  if (rows.length === 0) return [];
  const steps: number[] = [];
  for (let i = 1; i < rows.length; i++) {
    steps.push(rows[i]!.timestamp_ns - rows[i - 1]!.timestamp_ns);
  }
  steps.sort((a, b) => a - b);
  const medianStep = steps.length ? steps[Math.floor(steps.length / 2)]! : 1;

  const segments: RibbonSegment[] = [];
  let current: RibbonSegment = {
    startNs: rows[0]!.timestamp_ns,
    endNs: rows[0]!.timestamp_ns,
    target: rows[0]!.target,
  };
  for (let i = 1; i < rows.length; i++) {
    const row = rows[i]!;
    if (row.target === current.target) continue;
    current.endNs = row.timestamp_ns;
    segments.push(current);
    current = { startNs: row.timestamp_ns, endNs: row.timestamp_ns, target: row.target };
  }
  current.endNs = rows[rows.length - 1]!.timestamp_ns + Math.max(medianStep, 1);
  segments.push(current);
  return segments;
}

const RESERVED_COLORS: Record<string, string> = {
  background: "#d4d4d4",
  off_frame: "#8f8f8f",
  no_frame: "#f2f2f2",
};

const OBJECT_PALETTE = ["#4c78a8", "#f58518", "#54a24b", "#e45756", "#72b7b2", "#b279a2", "#eeca3b", "#9d755d"];

/** Stable color per target: fixed grays for the reserved labels, palette by
 * registry position for objects. */
export function categoryColor(target: string, objects: string[]): string {
  const reserved = RESERVED_COLORS[target];
  if (reserved) return reserved;
  const index = objects.indexOf(target);
  if (index < 0) return "#000000";
  return OBJECT_PALETTE[index % OBJECT_PALETTE.length]!;
}
