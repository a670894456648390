/** Pure HTML renderers: service numbers in, markup out. No model math
 * happens here; the only arithmetic is positioning things on screen. */

import { HistoryEntry } from "./state.js";
import { COP_NAMES, Recommendation, SensorRecord } from "./types.js";

function esc(value: unknown): string {
  return String(value).replace(/[&<>"]/g, (c) => ({
    "&": "&amp;",
    "<": "&lt;",
    ">": "&gt;",
    '"': "&quot;",
  })[c] as string);
}

export type CredibilityBand = "low" | "mid" | "high";

/** Display bands: below 1/3 low, up to 2/3 mid, above high. */
export function credibilityBand(credibility: number): CredibilityBand {
  if (credibility < 0.33) return "low";
  if (credibility <= 0.66) return "mid";
  return "high";
}

export function renderCredibilityBadge(credibility: number): string {
  const band = credibilityBand(credibility);
  return `<span class="badge badge-${band}" data-credibility="${credibility.toFixed(2)}">` +
    `${(100 * credibility).toFixed(0)}%</span>`;
}

/** Arrow length on a log scale; recommendation magnitudes span decades. */
export function arrowScale(delta: number, floor = 1e-4, decades = 4): number {
  const magnitude = Math.abs(delta);
  if (magnitude <= floor) return 0;
  const scaled = Math.log10(magnitude / floor) / decades;
  return Math.min(1, Math.max(0, scaled));
}

export function renderGauge(optimality: number): string {
  const clamped = Math.min(100, Math.max(0, optimality));
  const angle = -120 + 240 * (clamped / 100);
  return `
<div class="gauge" data-value="${clamped.toFixed(1)}">
  <svg viewBox="0 0 100 60">
    <path d="M 10 55 A 45 45 0 0 1 90 55" fill="none" stroke="#2d333b" stroke-width="8"/>
    <g transform="rotate(${angle.toFixed(1)} 50 55)">
      <line x1="50" y1="55" x2="50" y2="16" stroke="#58a6ff" stroke-width="3"/>
    </g>
  </svg>
  <div class="gauge-value">${clamped.toFixed(1)}</div>
  <div class="gauge-label">optimality</div>
</div>`;
}

/** Working-pressure bar with margin-bound and shutdown markers. */
export function renderPressureBar(wp: number, marginBound: number, shutdown: number): string {
  const frac = (v: number) => Math.min(100, Math.max(0, (100 * v) / shutdown));
  const zone = wp > marginBound ? "hot" : "ok";
  return `
<div class="pressure" data-wp="${wp.toFixed(1)}">
  <div class="pressure-track">
    <div class="pressure-fill pressure-${zone}" style="width:${frac(wp).toFixed(1)}%"></div>
    <div class="pressure-marker marker-mb" style="left:${frac(marginBound).toFixed(1)}%" title="margin bound ${marginBound.toFixed(0)} bar"></div>
    <div class="pressure-marker marker-ub" style="left:100%" title="shutdown ${shutdown.toFixed(0)} bar"></div>
  </div>
  <div class="pressure-caption">WP ${wp.toFixed(1)} bar (margin ${marginBound.toFixed(0)}, shutdown ${shutdown.toFixed(0)})</div>
</div>`;
}

export function renderArTrace(history: HistoryEntry[], width = 240, height = 48): string {
  if (history.length === 0) return `<svg class="trace" viewBox="0 0 ${width} ${height}"></svg>`;
  const values = history.map((h) => h.advance_rate);
  const lo = Math.min(...values);
  const hi = Math.max(...values);
  const span = hi - lo || 1;
  const points = values
    .map((v, i) => {
      const x = (i / Math.max(1, values.length - 1)) * width;
      const y = height - ((v - lo) / span) * (height - 4) - 2;
      return `${x.toFixed(1)},${y.toFixed(1)}`;
    })
    .join(" ");
  return `<svg class="trace" viewBox="0 0 ${width} ${height}">
  <polyline points="${points}" fill="none" stroke="#3fb950" stroke-width="1.5"/>
</svg>`;
}

export function renderCopCard(
  index: number,
  current: number,
  recommendation: Recommendation,
): string {
  const delta = recommendation.deltas[index];
  const atBound = recommendation.at_bound.includes(index);
  let advice: string;
  if (delta === 0) {
    advice = atBound ? `<span class="advice hold" data-flag="at-bound">hold (at bound)</span>`
                     : `<span class="advice hold">hold</span>`;
  } else {
    const direction = delta > 0 ? "up" : "down";
    const arrow = delta > 0 ? "&#9650;" : "&#9660;";
    const bar = Math.round(40 * arrowScale(delta)) + 4;
    advice = `<span class="advice ${direction}">` +
      `<span class="arrow" style="width:${bar}px">${arrow}</span>` +
      `<span class="delta">${delta > 0 ? "+" : ""}${delta.toFixed(3)}</span></span>`;
  }
  return `
<div class="cop-card" data-cop="${index}">
  <div class="cop-name">${esc(COP_NAMES[index])}</div>
  <div class="cop-value">${current.toFixed(2)}</div>
  ${advice}
  <button class="apply-step" data-cop="${index}" ${delta === 0 ? "disabled" : ""}>apply step</button>
</div>`;
}

export function renderCopCards(record: SensorRecord, recommendation: Recommendation): string {
  return record.cop.map((v, i) => renderCopCard(i, v, recommendation)).join("\n");
}

export function renderHistoryStrip(history: HistoryEntry[]): string {
  const bars = history
    .map((h) => {
      const height = Math.round(h.optimality) / 2; // 0..50 px
      const marker = h.acted ? `<div class="strip-action"></div>` : "";
      return `<div class="strip-col" title="t=${h.timestamp}">` +
        `<div class="strip-bar band-${credibilityBand(h.credibility)}" style="height:${height}px"></div>${marker}</div>`;
    })
    .join("");
  return `<div class="strip">${bars}</div>`;
}

export function renderWhatIf(result: Recommendation | null): string {
  if (!result) {
    return `<div class="whatif-result whatif-empty">enter a hypothetical setting and evaluate</div>`;
  }
  return `
<div class="whatif-result" data-optimality="${result.predicted_optimality.toFixed(1)}">
  predicted optimality <b>${result.predicted_optimality.toFixed(1)}</b>
  ${renderCredibilityBadge(result.credibility)}
</div>`;
}

export function renderConnectionBanner(connected: boolean): string {
  if (connected) return "";
  return `<div class="banner banner-lost">connection to the advisory service lost &mdash; retrying&hellip;</div>`;
}

export function renderFatalError(message: string): string {
  return `<div class="banner banner-fatal">${esc(message)}</div>`;
}

export function renderLiveView(
  record: SensorRecord,
  recommendation: Recommendation,
  history: HistoryEntry[],
  marginBound: number,
  shutdown: number,
): string {
  return `
<section class="live">
  <div class="live-top">
    ${renderGauge(recommendation.predicted_optimality)}
    <div class="live-mid">
      ${renderPressureBar(record.working_pressure, marginBound, shutdown)}
      <div class="trace-block">
        <div class="trace-label">advance rate ${record.advance_rate.toFixed(1)} mm/min</div>
        ${renderArTrace(history)}
      </div>
    </div>
    <div class="live-cred">credibility ${renderCredibilityBadge(recommendation.credibility)}</div>
  </div>
  <div class="cop-grid">${renderCopCards(record, recommendation)}</div>
  ${renderHistoryStrip(history)}
</section>`;
}
