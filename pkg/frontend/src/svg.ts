import { Series } from "./aggregate.js";

export interface ChartSpec {
  title: string;
  xLabel: string;
  yLabel: string;
  series: Series[];
  xLog?: boolean;
  width?: number;
  height?: number;
}

/** Stable color from the series name alone, so re-renders and unions of
 * CSVs keep every scheme on the same hue. */
export function colorFor(name: string): string {
  let hash = 2166136261;
  for (let i = 0; i < name.length; i++) {
    hash ^= name.charCodeAt(i);
    hash = Math.imul(hash, 16777619) >>> 0;
  }
  const hue = hash % 360;
  return `hsl(${hue}, 65%, 42%)`;
}

/** bits/s with k/M/G tick scaling. */
export function formatBps(v: number): string {
  const a = Math.abs(v);
  if (a >= 1e9) return `${trim(v / 1e9)} Gbps`;
  if (a >= 1e6) return `${trim(v / 1e6)} Mbps`;
  if (a >= 1e3) return `${trim(v / 1e3)} kbps`;
  return `${trim(v)} bps`;
}

function trim(v: number): string {
  const s = v.toPrecision(3);
  return s.includes(".") ? s.replace(/\.?0+$/, "") : s;
}

function escapeXml(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function niceLinearTicks(lo: number, hi: number, n = 6): number[] {
  if (!(hi > lo)) return [lo];
  const span = hi - lo;
  const step0 = span / Math.max(n - 1, 1);
  const mag = Math.pow(10, Math.floor(Math.log10(step0)));
  const candidates = [1, 2, 2.5, 5, 10].map((m) => m * mag);
  const step = candidates.find((c) => span / c <= n) ?? candidates[candidates.length - 1];
  const first = Math.ceil(lo / step) * step;
  const ticks: number[] = [];
  for (let v = first; v <= hi + 1e-9 * span; v += step) ticks.push(v);
  return ticks.length ? ticks : [lo, hi];
}

function logTicks(lo: number, hi: number): number[] {
  const ticks: number[] = [];
  const eLo = Math.floor(Math.log10(lo));
  const eHi = Math.ceil(Math.log10(hi));
  for (let e = eLo; e <= eHi; e++) {
    const v = Math.pow(10, e);
    if (v >= lo * (1 - 1e-12) && v <= hi * (1 + 1e-12)) ticks.push(v);
  }
  return ticks.length ? ticks : [lo, hi];
}

/** Render a line chart to a standalone SVG string. */
export function renderSvg(spec: ChartSpec): string {
  const width = spec.width ?? 860;
  const height = spec.height ?? 560;
  const margin = { left: 86, right: 230, top: 48, bottom: 64 };
  const plotW = width - margin.left - margin.right;
  const plotH = height - margin.top - margin.bottom;

  const drawn = spec.series.filter((s) => s.points.length > 0);
  const xs = drawn.flatMap((s) => s.points.map((p) => p.x));
  const ys = drawn.flatMap((s) => s.points.map((p) => p.y));
  let xLo = xs.length ? Math.min(...xs) : 0;
  let xHi = xs.length ? Math.max(...xs) : 1;
  let yLo = ys.length ? Math.min(...ys, 0) : 0;
  let yHi = ys.length ? Math.max(...ys) : 1;
  if (xLo === xHi) {
    xLo = spec.xLog ? xLo / 2 : xLo - 1;
    xHi = spec.xLog ? xHi * 2 : xHi + 1;
  }
  if (yLo === yHi) yHi = yLo + 1;
  const padY = 0.06 * (yHi - yLo);
  yHi += padY;

  const sx = (x: number) => {
    if (spec.xLog) {
      const t = (Math.log10(x) - Math.log10(xLo)) / (Math.log10(xHi) - Math.log10(xLo));
      return margin.left + t * plotW;
    }
    return margin.left + ((x - xLo) / (xHi - xLo)) * plotW;
  };
  const sy = (y: number) => margin.top + plotH - ((y - yLo) / (yHi - yLo)) * plotH;

  const parts: string[] = [];
  parts.push(`<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}" font-family="Helvetica, Arial, sans-serif">`);
  parts.push(`<rect width="${width}" height="${height}" fill="white"/>`);
  parts.push(`<text x="${margin.left + plotW / 2}" y="24" text-anchor="middle" font-size="16" class="chart-title">${escapeXml(spec.title)}</text>`);

  // axes
  parts.push(`<line x1="${margin.left}" y1="${margin.top + plotH}" x2="${margin.left + plotW}" y2="${margin.top + plotH}" stroke="black" class="x-axis"/>`);
  parts.push(`<line x1="${margin.left}" y1="${margin.top}" x2="${margin.left}" y2="${margin.top + plotH}" stroke="black" class="y-axis"/>`);

  const xTicks = spec.xLog ? logTicks(xLo, xHi) : niceLinearTicks(xLo, xHi);
  for (const t of xTicks) {
    const px = sx(t);
    parts.push(`<line x1="${px}" y1="${margin.top + plotH}" x2="${px}" y2="${margin.top + plotH + 5}" stroke="black"/>`);
    parts.push(`<line x1="${px}" y1="${margin.top}" x2="${px}" y2="${margin.top + plotH}" stroke="#dddddd"/>`);
    parts.push(`<text x="${px}" y="${margin.top + plotH + 20}" text-anchor="middle" font-size="11" class="x-tick">${escapeXml(formatBps(t))}</text>`);
  }
  for (const t of niceLinearTicks(yLo, yHi)) {
    const py = sy(t);
    parts.push(`<line x1="${margin.left - 5}" y1="${py}" x2="${margin.left}" y2="${py}" stroke="black"/>`);
    parts.push(`<line x1="${margin.left}" y1="${py}" x2="${margin.left + plotW}" y2="${py}" stroke="#dddddd"/>`);
    parts.push(`<text x="${margin.left - 8}" y="${py + 4}" text-anchor="end" font-size="11" class="y-tick">${escapeXml(formatBps(t))}</text>`);
  }
  parts.push(`<text x="${margin.left + plotW / 2}" y="${height - 16}" text-anchor="middle" font-size="13" class="x-label">${escapeXml(spec.xLabel)}</text>`);
  parts.push(`<text x="22" y="${margin.top + plotH / 2}" text-anchor="middle" font-size="13" class="y-label" transform="rotate(-90 22 ${margin.top + plotH / 2})">${escapeXml(spec.yLabel)}</text>`);

  // series
  let legendY = margin.top + 8;
  for (const series of drawn) {
    const color = colorFor(series.name);
    const coords = series.points.map((p) => `${sx(p.x).toFixed(2)},${sy(p.y).toFixed(2)}`);
    if (coords.length > 1) {
      parts.push(`<polyline class="series-line" data-name="${escapeXml(series.name)}" points="${coords.join(" ")}" fill="none" stroke="${color}" stroke-width="2"/>`);
    }
    for (const p of series.points) {
      parts.push(`<circle class="series-marker" data-name="${escapeXml(series.name)}" cx="${sx(p.x).toFixed(2)}" cy="${sy(p.y).toFixed(2)}" r="3.2" fill="${color}"/>`);
    }
    const nText = series.nMin === series.nMax ? `n=${series.nMin}` : `n=${series.nMin}..${series.nMax}`;
    parts.push(`<line x1="${margin.left + plotW + 14}" y1="${legendY}" x2="${margin.left + plotW + 38}" y2="${legendY}" stroke="${color}" stroke-width="2"/>`);
    parts.push(`<text class="legend-entry" x="${margin.left + plotW + 44}" y="${legendY + 4}" font-size="11">${escapeXml(`${series.name} [${nText}]`)}</text>`);
    legendY += 18;
  }
  parts.push("</svg>");
  return parts.join("\n");
}
