export { EXPECTED_COLUMNS, CsvFormatError, parseCsv, parseInputSpec, loadRows } from "./csv.js";
export type { RunRow, LabelledInput } from "./csv.js";
export { aggregateSweep, aggregateRateVsSecrecy } from "./aggregate.js";
export type { Series, SeriesPoint, Aggregated } from "./aggregate.js";
export { renderSvg, colorFor, formatBps } from "./svg.js";
export type { ChartSpec } from "./svg.js";
export { renderChart, writeImage, KINDS } from "./render.js";
export type { Kind, RenderResult } from "./render.js";
