import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import {
  arrowScale,
  credibilityBand,
  renderConnectionBanner,
  renderCopCards,
  renderCredibilityBadge,
  renderGauge,
  renderHistoryStrip,
  renderLiveView,
  renderPressureBar,
  renderWhatIf,
} from "../src/render.js";
import { SessionStore, applyTick, emptyState } from "../src/state.js";
import { SCHEMA_VERSION, TickPayload } from "../src/types.js";
import { MockService, record, recommendation } from "./mock.js";

describe("credibility badge", () => {
  it("follows the display bands", () => {
    expect(credibilityBand(0.1)).toBe("low");
    expect(credibilityBand(0.32)).toBe("low");
    expect(credibilityBand(0.33)).toBe("mid");
    expect(credibilityBand(0.66)).toBe("mid");
    expect(credibilityBand(0.67)).toBe("high");
    expect(credibilityBand(0.9)).toBe("high");
  });

  it("credibility 0.9 renders the green band", () => {
    const html = renderCredibilityBadge(0.9);
    expect(html).toContain("badge-high");
    expect(html).toContain("90%");
  });
});

describe("control cards", () => {
  it("zero-gradient recommendation shows hold on every card", () => {
    const rec = recommendation({
      gradients: [0, 0, 0, 0, 0],
      deltas: [0, 0, 0, 0, 0],
    });
    const html = renderCopCards(record(), rec);
    const holds = html.match(/class="advice hold"/g) ?? [];
    expect(holds).toHaveLength(5);
    expect(html).not.toContain("advice up");
    expect(html).not.toContain("advice down");
  });

  it("directions and bound flags render", () => {
    const rec = recommendation({
      gradients: [0.5, -0.5, 0, 0.4, 0],
      deltas: [0.05, -0.05, 0, 0, 0],
      at_bound: [3],
    });
    const html = renderCopCards(record(), rec);
    expect(html).toContain("advice up");
    expect(html).toContain("advice down");
    expect(html).toContain("at-bound");
  });

  it("arrow length grows on a log scale", () => {
    const tiny = arrowScale(1e-3);
    const small = arrowScale(1e-2);
    const large = arrowScale(1e-1);
    expect(tiny).toBeGreaterThan(0);
    expect(small).toBeGreaterThan(tiny);
    expect(large).toBeGreaterThan(small);
    expect(small - tiny).toBeCloseTo(large - small, 10);
    expect(arrowScale(0)).toBe(0);
    expect(arrowScale(1e6)).toBe(1);
  });
});

describe("live view", () => {
  it("gauge shows the service-provided optimality", () => {
    const html = renderGauge(73.4);
    expect(html).toContain('data-value="73.4"');
  });

  it("pressure bar places margin and shutdown markers", () => {
    const html = renderPressureBar(120, 114, 150);
    expect(html).toContain("marker-mb");
    expect(html).toContain("marker-ub");
    expect(html).toContain("pressure-hot"); // above the margin bound
    expect(renderPressureBar(80, 114, 150)).toContain("pressure-ok");
  });

  it("history strip marks operator actions", () => {
    let state = emptyState();
    state = applyTick(state, {
      schema_version: SCHEMA_VERSION,
      record: record({ cop: [5, 5, 5, 5, 5] }),
      recommendation: recommendation(),
    });
    state = applyTick(state, {
      schema_version: SCHEMA_VERSION,
      record: record({ timestamp: 10, cop: [6, 5, 5, 5, 5] }),
      recommendation: recommendation(),
    });
    const html = renderHistoryStrip(state.history);
    expect(html.match(/strip-action/g)).toHaveLength(1);
  });

  it("full view is traceable to the service payload", () => {
    const rec = recommendation({ predicted_optimality: 61.5, credibility: 0.7 });
    const html = renderLiveView(record(), rec, [], 114, 150);
    expect(html).toContain('data-value="61.5"');
    expect(html).toContain("badge-high");
    expect(html).toContain('data-wp="88.0"');
  });
});

describe("applying the recommended step", () => {
  it("displayed optimality strictly increases on the next tick", async () => {
    // scripted noise-free scenario: the service reports a higher score
    // once the recommended first-control step is applied
    const mock = new MockService({
      tick: (n, cop): TickPayload => {
        const followed = cop[0] > 5;
        return {
          schema_version: SCHEMA_VERSION,
          record: record({ timestamp: 10 * n, cop }),
          recommendation: recommendation({
            deltas: [0.5, 0, 0, 0, 0],
            predicted_optimality: followed ? 58.0 : 50.0,
          }),
        };
      },
    });
    const store = new SessionStore(new ApiClient("", mock.fetch));
    await store.open();
    const before = store.state.tick!.recommendation.predicted_optimality;
    const beforeHtml = renderGauge(before);
    await store.applyRecommendedStep(0);
    const after = store.state.tick!.recommendation.predicted_optimality;
    const afterHtml = renderGauge(after);
    expect(after).toBeGreaterThan(before);
    expect(beforeHtml).toContain('data-value="50.0"');
    expect(afterHtml).toContain('data-value="58.0"');
  });
});

describe("banners", () => {
  it("connection loss shows the retry banner", () => {
    expect(renderConnectionBanner(false)).toContain("banner-lost");
    expect(renderConnectionBanner(true)).toBe("");
  });

  it("what-if panel renders service predictions only", () => {
    const html = renderWhatIf(recommendation({ predicted_optimality: 42.0, credibility: 0.2 }));
    expect(html).toContain('data-optimality="42.0"');
    expect(html).toContain("badge-low");
    expect(renderWhatIf(null)).toContain("whatif-empty");
  });
});
