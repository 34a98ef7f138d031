import { readFileSync } from "fs";

export const EXPECTED_COLUMNS = [
  "trial", "seed", "scheme", "sweep_axis", "sweep_value", "sum_rate_bps",
  "secrecy_sum_rate_bps", "w_p1_hz", "w_p2_hz", "w_s_hz", "iterations",
  "feasible", "wall_ms",
] as const;

export interface RunRow {
  trial: number;
  seed: number;
  scheme: string;
  sweepAxis: string;
  sweepValue: number;
  sumRateBps: number;
  secrecySumRateBps: number;
  wP1Hz: number;
  wP2Hz: number;
  wSHz: number;
  iterations: number;
  feasible: boolean;
  wallMs: number;
  /** optional label attached to the source file (e.g. "10dB", "S_R=2") */
  label: string;
}

const HEADER_LINE = EXPECTED_COLUMNS.join(",");

export class CsvFormatError extends Error {}

/**
 * Parse harness CSV text. The header must contain every expected column;
 * a missing one is reported by name. Repeated header lines (files glued
 * together with `cat`) are skipped so concatenated sweeps parse as the
 * union of their rows.
 */
export function parseCsv(text: string, label = ""): RunRow[] {
  const lines = text.split(/\r?\n/).filter((l) => l.trim().length > 0);
  if (lines.length === 0) {
    throw new CsvFormatError("empty CSV input");
  }
  const header = lines[0].split(",").map((c) => c.trim());
  for (const col of EXPECTED_COLUMNS) {
    if (!header.includes(col)) {
      throw new CsvFormatError(`missing column '${col}'`);
    }
  }
  const index = new Map<string, number>();
  header.forEach((c, j) => index.set(c, j));
  const col = (cells: string[], name: string) => cells[index.get(name)!];

  const rows: RunRow[] = [];
  for (const line of lines.slice(1)) {
    if (line === HEADER_LINE || line.startsWith("trial,")) continue;
    const cells = line.split(",");
    if (cells.length < header.length) {
      throw new CsvFormatError(`malformed row: ${line}`);
    }
    const num = (name: string) => {
      const v = Number(col(cells, name));
      if (!Number.isFinite(v)) {
        throw new CsvFormatError(`non-numeric ${name} in row: ${line}`);
      }
      return v;
    };
    rows.push({
      trial: num("trial"),
      seed: num("seed"),
      scheme: col(cells, "scheme"),
      sweepAxis: col(cells, "sweep_axis"),
      sweepValue: num("sweep_value"),
      sumRateBps: num("sum_rate_bps"),
      secrecySumRateBps: num("secrecy_sum_rate_bps"),
      wP1Hz: num("w_p1_hz"),
      wP2Hz: num("w_p2_hz"),
      wSHz: num("w_s_hz"),
      iterations: num("iterations"),
      feasible: col(cells, "feasible").trim() === "true",
      wallMs: num("wall_ms"),
      label,
    });
  }
  return rows;
}

export interface LabelledInput {
  path: string;
  label: string;
}

/** `path[:label]`; a suffix containing '/' or '.csv' is part of the path. */
export function parseInputSpec(spec: string): LabelledInput[] {
  return spec.split(",").map((part) => {
    const trimmed = part.trim();
    const colon = trimmed.lastIndexOf(":");
    if (colon > 0) {
      const suffix = trimmed.slice(colon + 1);
      if (suffix.length > 0 && !suffix.includes("/") && !suffix.endsWith(".csv")) {
        return { path: trimmed.slice(0, colon), label: suffix };
      }
    }
    return { path: trimmed, label: "" };
  });
}

export function loadRows(inputs: LabelledInput[]): RunRow[] {
  const rows: RunRow[] = [];
  for (const input of inputs) {
    const text = readFileSync(input.path, "utf8");
    rows.push(...parseCsv(text, input.label));
  }
  return rows;
}
