import { describe, expect, it } from "vitest";

import { boxPlotSvg, gaugeHtml } from "../src/boxplot.js";

const flat = { min: 0.7, q1: 0.7, median: 0.7, q3: 0.7, max: 0.7 };

describe("boxPlotSvg", () => {
  it("renders a flat box for a constant five-number summary", () => {
    const svg = boxPlotSvg([{ name: "Home Care", stats: flat }]);
    expect(svg).toContain('data-median="0.7"');
    // All five numbers equal: the interquartile rect collapses to height 0.
    expect(svg).toMatch(/<rect [^>]*height="0"/);
    expect(svg).toContain("Home Care");
  });

  it("renders one box per category", () => {
    const svg = boxPlotSvg([
      { name: "A", stats: flat },
      { name: "B", stats: { min: 0.5, q1: 0.6, median: 0.8, q3: 0.9, max: 1.0 } },
    ]);
    expect((svg.match(/<rect /g) ?? []).length).toBe(2);
  });

  it("uses reported values verbatim, no recomputation", () => {
    const svg = boxPlotSvg([{ name: "B", stats: { min: 0.5, q1: 0.6, median: 0.8, q3: 0.9, max: 1.0 } }]);
    expect(svg).toContain('data-median="0.8"');
  });

  it("escapes category names", () => {
    const svg = boxPlotSvg([{ name: "A<B & C", stats: flat }]);
    expect(svg).toContain("A&lt;B &amp; C");
    expect(svg).not.toContain("A<B");
  });
});

describe("gaugeHtml", () => {
  it("shows two decimals and a proportional fill", () => {
    const html = gaugeHtml("Compliance", 0.95);
    expect(html).toContain("0.95");
    expect(html).toContain("width:95%");
  });

  it("handles a missing value", () => {
    expect(gaugeHtml("Conflict resolution efficiency", null)).toContain("n/a");
  });
});
