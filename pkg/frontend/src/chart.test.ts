import { describe, expect, it } from "vitest";

import type { RoundMetrics } from "./api.js";
import {
  chartPoints,
  DEFAULT_LAYOUT,
  polylinePath,
  renderChartSvg,
} from "./chart.js";

function row(labeled: number, accuracy: number): RoundMetrics {
  return {
    round: 0,
    labeled_count: labeled,
    accuracy,
    precision: accuracy,
    recall: accuracy,
    f1: accuracy,
  };
}

const { width, height, margin } = DEFAULT_LAYOUT;
const innerW = width - margin.left - margin.right;
const innerH = height - margin.top - margin.bottom;

describe("chartPoints", () => {
  it("returns no points for empty metrics", () => {
    expect(chartPoints([])).toEqual([]);
  });

  it("spans the x axis from the first to the last labeled count", () => {
    const pts = chartPoints([row(10, 0), row(20, 50), row(30, 100)]);
    expect(pts[0].x).toBeCloseTo(margin.left);
    expect(pts[1].x).toBeCloseTo(margin.left + innerW / 2);
    expect(pts[2].x).toBeCloseTo(margin.left + innerW);
  });

  it("maps accuracy 0..100 to the bottom..top of the plot area", () => {
    const pts = chartPoints([row(10, 0), row(20, 100)]);
    expect(pts[0].y).toBeCloseTo(margin.top + innerH);
    expect(pts[1].y).toBeCloseTo(margin.top);
  });

  it("centers a single point without dividing by zero", () => {
    const pts = chartPoints([row(10, 50)]);
    expect(pts).toHaveLength(1);
    expect(Number.isFinite(pts[0].x)).toBe(true);
    expect(pts[0].y).toBeCloseTo(margin.top + innerH / 2);
  });
});

describe("polylinePath", () => {
  it("emits a move followed by line segments", () => {
    const path = polylinePath(
      chartPoints([row(0, 0), row(10, 100)]),
    );
    expect(path.startsWith("M")).toBe(true);
    expect(path.split(" ")).toHaveLength(2);
    expect(path).toContain("L");
  });
});

describe("renderChartSvg", () => {
  it("always draws axes and gridlines, even with no data", () => {
    const svg = renderChartSvg([]);
    expect(svg).toContain("<svg");
    expect((svg.match(/class="axis"/g) ?? []).length).toBe(2);
    expect((svg.match(/class="grid"/g) ?? []).length).toBe(5);
    expect(svg).not.toContain('class="line"');
    expect(svg).not.toContain('class="pt"');
  });

  it("draws one marker per metrics row and a line for two or more", () => {
    const one = renderChartSvg([row(10, 40)]);
    expect((one.match(/class="pt"/g) ?? []).length).toBe(1);
    expect(one).not.toContain('class="line"');

    const three = renderChartSvg([row(10, 40), row(20, 60), row(30, 80)]);
    expect((three.match(/class="pt"/g) ?? []).length).toBe(3);
    expect(three).toContain('class="line"');
    expect(three).toContain("20 labels: 60.0%");
  });

  it("labels the x axis with labeled counts", () => {
    const svg = renderChartSvg([row(12, 40), row(24, 60)]);
    expect(svg).toContain(">12</text>");
    expect(svg).toContain(">24</text>");
    expect(svg).toContain("labeled samples");
  });
});
