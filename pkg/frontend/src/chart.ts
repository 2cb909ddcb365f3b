/** Accuracy-vs-labeled-samples line chart, rendered as a standalone SVG.
 *
 * The geometry helpers are pure so the chart is testable without a DOM.
 */

import type { RoundMetrics } from "./api.js";

export interface ChartLayout {
  width: number;
  height: number;
  margin: { top: number; right: number; bottom: number; left: number };
}

export const DEFAULT_LAYOUT: ChartLayout = {
  width: 420,
  height: 220,
  margin: { top: 12, right: 12, bottom: 34, left: 44 },
};

export interface ChartPoint {
  x: number;
  y: number;
  labeledCount: number;
  accuracy: number;
}

/** Map metric rows to pixel coordinates; accuracy axis is fixed 0..100. */
export function chartPoints(
  metrics: RoundMetrics[],
  layout: ChartLayout = DEFAULT_LAYOUT,
): ChartPoint[] {
  if (metrics.length === 0) return [];
  const { width, height, margin } = layout;
  const innerW = width - margin.left - margin.right;
  const innerH = height - margin.top - margin.bottom;
  const xs = metrics.map((m) => m.labeled_count);
  const xMin = Math.min(...xs);
  const xMax = Math.max(...xs);
  const xSpan = xMax - xMin || 1;
  return metrics.map((m) => ({
    x: margin.left + ((m.labeled_count - xMin) / xSpan) * innerW,
    y: margin.top + (1 - m.accuracy / 100) * innerH,
    labeledCount: m.labeled_count,
    accuracy: m.accuracy,
  }));
}

export function polylinePath(points: ChartPoint[]): string {
  return points
    .map((p, i) => `${i === 0 ? "M" : "L"}${p.x.toFixed(1)},${p.y.toFixed(1)}`)
    .join(" ");
}

/** Full SVG markup: axes are always drawn, data only when present. */
export function renderChartSvg(
  metrics: RoundMetrics[],
  layout: ChartLayout = DEFAULT_LAYOUT,
): string {
  const { width, height, margin } = layout;
  const x0 = margin.left;
  const x1 = width - margin.right;
  const y0 = margin.top;
  const y1 = height - margin.bottom;
  const points = chartPoints(metrics, layout);

  const gridLines = [0, 25, 50, 75, 100]
    .map((pct) => {
      const y = y0 + (1 - pct / 100) * (y1 - y0);
      return (
        `<line class="grid" x1="${x0}" y1="${y.toFixed(1)}" ` +
        `x2="${x1}" y2="${y.toFixed(1)}"></line>` +
        `<text class="tick" x="${x0 - 6}" y="${(y + 3).toFixed(1)}" ` +
        `text-anchor="end">${pct}</text>`
      );
    })
    .join("");

  const markers = points
    .map(
      (p) =>
        `<circle class="pt" cx="${p.x.toFixed(1)}" cy="${p.y.toFixed(1)}" r="3">` +
        `<title>${p.labeledCount} labels: ${p.accuracy.toFixed(1)}%</title></circle>`,
    )
    .join("");

  const line =
    points.length > 1
      ? `<path class="line" d="${polylinePath(points)}" fill="none"></path>`
      : "";

  const xLabels = points
    .map(
      (p) =>
        `<text class="tick" x="${p.x.toFixed(1)}" y="${y1 + 16}" ` +
        `text-anchor="middle">${p.labeledCount}</text>`,
    )
    .join("");

  return (
    `<svg viewBox="0 0 ${width} ${height}" class="chart" role="img" ` +
    `aria-label="accuracy versus labeled samples">` +
    gridLines +
    `<line class="axis" x1="${x0}" y1="${y1}" x2="${x1}" y2="${y1}"></line>` +
    `<line class="axis" x1="${x0}" y1="${y0}" x2="${x0}" y2="${y1}"></line>` +
    line +
    markers +
    xLabels +
    `<text class="axis-label" x="${(x0 + x1) / 2}" y="${height - 4}" ` +
    `text-anchor="middle">labeled samples</text>` +
    `</svg>`
  );
}
