// Box plot SVG from reported five-number summaries. The console never
// recomputes statistics; it draws exactly what the report says.

import type { BoxStats } from "./api.js";

export interface CategoryBox {
  name: string;
  stats: BoxStats;
}

const WIDTH_PER_BOX = 72;
const PLOT_HEIGHT = 220;
const LABEL_HEIGHT = 130;
const TOP_PAD = 16;

function y(value: number): number {
  // Scores live in [0, 1]; invert so 1.0 is at the top.
  return TOP_PAD + (1 - value) * PLOT_HEIGHT;
}

function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

export function boxPlotSvg(categories: CategoryBox[]): string {
  const width = Math.max(1, categories.length) * WIDTH_PER_BOX + 60;
  const height = TOP_PAD + PLOT_HEIGHT + LABEL_HEIGHT;
  const parts: string[] = [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
      `viewBox="0 0 ${width} ${height}" role="img" aria-label="evaluation scores by category">`,
  ];

  for (const tick of [0, 0.2, 0.4, 0.6, 0.8, 1.0]) {
    const ty = y(tick);
    parts.push(
      `<line x1="40" y1="${ty}" x2="${width - 10}" y2="${ty}" stroke="#ddd" stroke-dasharray="4 3"/>`,
      `<text x="34" y="${ty + 4}" text-anchor="end" font-size="10" fill="#666">${tick.toFixed(1)}</text>`,
    );
  }

  categories.forEach((category, index) => {
    const cx = 40 + index * WIDTH_PER_BOX + WIDTH_PER_BOX / 2;
    const half = 18;
    const s = category.stats;
    const boxTop = y(s.q3);
    const boxBottom = y(s.q1);
    parts.push(
      // Whiskers are the true min and max from the report.
      `<line x1="${cx}" y1="${y(s.max)}" x2="${cx}" y2="${boxTop}" stroke="#345" />`,
      `<line x1="${cx}" y1="${boxBottom}" x2="${cx}" y2="${y(s.min)}" stroke="#345" />`,
      `<line x1="${cx - half / 2}" y1="${y(s.max)}" x2="${cx + half / 2}" y2="${y(s.max)}" stroke="#345" />`,
      `<line x1="${cx - half / 2}" y1="${y(s.min)}" x2="${cx + half / 2}" y2="${y(s.min)}" stroke="#345" />`,
      `<rect x="${cx - half}" y="${boxTop}" width="${half * 2}" height="${Math.max(0, boxBottom - boxTop)}" ` +
        `fill="#9bc4e8" stroke="#345" />`,
      `<line x1="${cx - half}" y1="${y(s.median)}" x2="${cx + half}" y2="${y(s.median)}" ` +
        `stroke="#123" stroke-width="2" data-median="${s.median}" />`,
      `<text x="${cx}" y="${TOP_PAD + PLOT_HEIGHT + 12}" font-size="10" fill="#333" ` +
        `transform="rotate(60 ${cx} ${TOP_PAD + PLOT_HEIGHT + 12})">${esc(category.name)}</text>`,
    );
  });

  parts.push("</svg>");
  return parts.join("\n");
}

export function gaugeHtml(label: string, value: number | null): string {
  const shown = value === null ? "n/a" : value.toFixed(2);
  const percent = value === null ? 0 : Math.round(value * 100);
  return (
    `<div class="gauge"><div class="gauge-label">${esc(label)}</div>` +
    `<div class="gauge-bar"><div class="gauge-fill" style="width:${percent}%"></div></div>` +
    `<div class="gauge-value">${shown}</div></div>`
  );
}
