import { writeFileSync } from "fs";

import { LabelledInput, loadRows } from "./csv.js";
import { aggregateRateVsSecrecy, aggregateSweep } from "./aggregate.js";
import { ChartSpec, renderSvg } from "./svg.js";

export const KINDS = ["backhaul-sweep", "rate-vs-secrecy"] as const;
export type Kind = (typeof KINDS)[number];

export interface RenderResult {
  svg: string;
  warnings: string[];
  seriesCount: number;
}

export function renderChart(kind: Kind, inputs: LabelledInput[],
                            width?: number, height?: number): RenderResult {
  const rows = loadRows(inputs);
  if (rows.length === 0) {
    throw new Error("no data rows in input");
  }
  const axis = rows[0].sweepAxis;
  let spec: ChartSpec;
  let warnings: string[];
  if (kind === "backhaul-sweep") {
    const agg = aggregateSweep(rows);
    warnings = agg.warnings;
    spec = {
      title: "Average sum-rate vs backhaul capacity",
      xLabel: axisLabel(axis),
      yLabel: "average sum-rate (bps)",
      series: agg.series,
      xLog: true,
      width, height,
    };
  } else if (kind === "rate-vs-secrecy") {
    const agg = aggregateRateVsSecrecy(rows);
    warnings = agg.warnings;
    spec = {
      title: "Average sum-rate vs average secrecy sum-rate",
      xLabel: "average secrecy sum-rate (bps)",
      yLabel: "average sum-rate (bps)",
      series: agg.series,
      xLog: false,
      width, height,
    };
  } else {
    throw new Error(`unknown kind '${kind}'; choose from ${KINDS.join(", ")}`);
  }
  const drawn = spec.series.filter((s) => s.points.length > 0);
  return { svg: renderSvg(spec), warnings, seriesCount: drawn.length };
}

function axisLabel(axis: string): string {
  switch (axis) {
    case "backhaul_capacity": return "backhaul capacity (bps)";
    case "privacy_threshold": return "privacy threshold (bps)";
    case "snr_db": return "SNR (dB)";
    case "subset_size": return "relayed streams per operator";
    default: return axis;
  }
}

/** Write SVG directly or rasterize to PNG based on the file extension. */
export async function writeImage(svg: string, outPath: string): Promise<void> {
  if (outPath.toLowerCase().endsWith(".png")) {
    const { Resvg } = await import("@resvg/resvg-js");
    const png = new Resvg(svg, { fitTo: { mode: "original" } }).render().asPng();
    writeFileSync(outPath, png);
  } else {
    writeFileSync(outPath, svg, "utf8");
  }
}
