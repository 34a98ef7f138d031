import { RunRow } from "./csv.js";

export interface SeriesPoint {
  x: number;
  y: number;
  /** feasible trials behind this point */
  n: number;
}

export interface Series {
  name: string;
  points: SeriesPoint[];
  nMin: number;
  nMax: number;
}

export interface Aggregated {
  series: Series[];
  warnings: string[];
}

function groupName(row: RunRow): string {
  return row.label ? `${row.label} ${row.scheme}` : row.scheme;
}

function mean(values: number[]): number {
  return values.reduce((a, b) => a + b, 0) / values.length;
}

function groupRows(rows: RunRow[]): Map<string, RunRow[]> {
  const groups = new Map<string, RunRow[]>();
  for (const row of rows) {
    const key = groupName(row);
    const bucket = groups.get(key);
    if (bucket) bucket.push(row);
    else groups.set(key, [row]);
  }
  return groups;
}

function finishSeries(name: string, points: SeriesPoint[]): Series {
  const ns = points.map((p) => p.n);
  return {
    name,
    points,
    nMin: ns.length ? Math.min(...ns) : 0,
    nMax: ns.length ? Math.max(...ns) : 0,
  };
}

/**
 * One line per group: mean sum-rate over feasible rows at every sweep value.
 * Points whose feasible set is empty are omitted with a warning.
 */
export function aggregateSweep(rows: RunRow[]): Aggregated {
  const warnings: string[] = [];
  const series: Series[] = [];
  for (const [name, bucket] of groupRows(rows)) {
    const byValue = new Map<number, RunRow[]>();
    for (const row of bucket) {
      const list = byValue.get(row.sweepValue);
      if (list) list.push(row);
      else byValue.set(row.sweepValue, [row]);
    }
    const points: SeriesPoint[] = [];
    for (const value of [...byValue.keys()].sort((a, b) => a - b)) {
      const feasible = byValue.get(value)!.filter((r) => r.feasible);
      if (feasible.length === 0) {
        warnings.push(`${name}: no feasible trials at sweep value ${value}, point omitted`);
        continue;
      }
      points.push({
        x: value,
        y: mean(feasible.map((r) => r.sumRateBps)),
        n: feasible.length,
      });
    }
    series.push(finishSeries(name, points));
  }
  return { series, warnings };
}

/**
 * Rate-versus-secrecy trade-off: one line per group, one point per sweep
 * value at (mean secrecy sum-rate, mean sum-rate) over feasible rows. The
 * sweep parameterizes the curve.
 */
export function aggregateRateVsSecrecy(rows: RunRow[]): Aggregated {
  const warnings: string[] = [];
  const series: Series[] = [];
  for (const [name, bucket] of groupRows(rows)) {
    const byValue = new Map<number, RunRow[]>();
    for (const row of bucket) {
      const list = byValue.get(row.sweepValue);
      if (list) list.push(row);
      else byValue.set(row.sweepValue, [row]);
    }
    const points: SeriesPoint[] = [];
    for (const value of [...byValue.keys()].sort((a, b) => a - b)) {
      const feasible = byValue.get(value)!.filter((r) => r.feasible);
      if (feasible.length === 0) {
        warnings.push(`${name}: no feasible trials at sweep value ${value}, point omitted`);
        continue;
      }
      points.push({
        x: mean(feasible.map((r) => r.secrecySumRateBps)),
        y: mean(feasible.map((r) => r.sumRateBps)),
        n: feasible.length,
      });
    }
    series.push(finishSeries(name, points));
  }
  return { series, warnings };
}
