/** DOM wiring for the operator console.
 *
 * Live mode drives the simulator through explicit POST steps on a client
 * timer (so the POST log fully determines the session) and renders from
 * the SSE change feed. The what-if panel calls /recommend without
 * touching the session.
 */

import { ApiClient } from "./api.js";
import {
  renderConnectionBanner,
  renderFatalError,
  renderLiveView,
  renderWhatIf,
} from "./render.js";
import { SessionStore } from "./state.js";
import { GroundClass, SCHEMA_VERSION, SchemaVersionError, TickPayload } from "./types.js";

const TICK_MS = 1000;

const client = new ApiClient("");
const store = new SessionStore(client);

let timer: number | null = null;
let source: EventSource | null = null;
let pendingCop: number[] | null = null;
let marginBound = 100;
let shutdown = 150;
let connected = true;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

function fatal(message: string): void {
  stopLive();
  el("banner").innerHTML = renderFatalError(message);
}

function renderAll(): void {
  el("banner").innerHTML = renderConnectionBanner(connected);
  const tick = store.state.tick;
  if (!tick) return;
  el("live").innerHTML = renderLiveView(
    tick.record,
    tick.recommendation,
    store.state.history,
    marginBound,
    shutdown,
  );
  document.querySelectorAll<HTMLButtonElement>(".apply-step").forEach((button) => {
    button.addEventListener("click", () => {
      const index = Number(button.dataset.cop);
      store.applyRecommendedStep(index).catch(handleError);
    });
  });
  const sliders = el<HTMLDivElement>("sliders");
  if (sliders.childElementCount === 0) {
    tick.record.cop.forEach((value, i) => {
      const row = document.createElement("div");
      row.innerHTML = `<label>CoP${i + 1}</label>
        <input type="range" min="0" max="10" step="0.1" value="${value}" data-slider="${i}">
        <span data-slider-value="${i}">${value.toFixed(1)}</span>`;
      sliders.appendChild(row);
    });
    sliders.addEventListener("input", (event) => {
      const input = event.target as HTMLInputElement;
      if (input.dataset.slider === undefined) return;
      const index = Number(input.dataset.slider);
      const cop = pendingCop ?? [...(store.state.tick?.record.cop ?? [])];
      cop[index] = Number(input.value);
      pendingCop = cop;
      const label = sliders.querySelector(`[data-slider-value="${index}"]`);
      if (label) label.textContent = Number(input.value).toFixed(1);
    });
  }
}

function handleError(err: unknown): void {
  if (err instanceof SchemaVersionError) {
    fatal(err.message);
    return;
  }
  connected = false;
  el("banner").innerHTML = renderConnectionBanner(false);
}

async function refreshModelInfo(gc: GroundClass): Promise<void> {
  const info = await client.models();
  const entry = info.models[gc];
  if (entry) {
    marginBound = entry.optimality.mb;
    shutdown = entry.optimality.ub;
  }
}

function subscribeStream(sessionId: string): void {
  source?.close();
  source = new EventSource(client.streamUrl(sessionId));
  source.addEventListener("tick", (event) => {
    const payload = JSON.parse((event as MessageEvent).data) as TickPayload;
    if (payload.schema_version !== SCHEMA_VERSION) {
      fatal(new SchemaVersionError(payload.schema_version).message);
      return;
    }
    connected = true;
    store.ingest(payload);
  });
  source.onerror = () => {
    connected = false;
    el("banner").innerHTML = renderConnectionBanner(false);
  };
}

function stopLive(): void {
  if (timer !== null) {
    window.clearInterval(timer);
    timer = null;
  }
  source?.close();
  source = null;
}

async function startSession(): Promise<void> {
  stopLive();
  const gc = el<HTMLSelectElement>("gc-select").value as GroundClass;
  const seed = Number(el<HTMLInputElement>("seed-input").value) || 0;
  try {
    await refreshModelInfo(gc);
    await store.open({ seed, ground_class: gc });
    pendingCop = null;
    subscribeStream(store.state.sessionId as string);
    timer = window.setInterval(() => {
      const cop = pendingCop ?? store.state.tick?.record.cop;
      if (cop) store.step([...cop]).catch(handleError);
      pendingCop = null;
    }, TICK_MS);
  } catch (err) {
    handleError(err);
  }
}

async function stopSession(): Promise<void> {
  stopLive();
  await store.close().catch(() => undefined);
}

async function evaluateWhatIf(): Promise<void> {
  const tick = store.state.tick;
  if (!tick) return;
  const raw = el<HTMLInputElement>("whatif-cop").value;
  const cop = raw.split(",").map((v) => Number(v.trim()));
  if (cop.length !== 5 || cop.some((v) => Number.isNaN(v))) {
    el("whatif-result").innerHTML = renderFatalError("enter five comma-separated numbers");
    return;
  }
  try {
    const rec = await client.recommend(tick.record.ground_class, cop, tick.record.cxp);
    el("whatif-result").innerHTML = renderWhatIf(rec);
  } catch (err) {
    handleError(err);
  }
}

store.subscribe(renderAll);

el("start-btn").addEventListener("click", () => void startSession());
el("stop-btn").addEventListener("click", () => void stopSession());
el("whatif-btn").addEventListener("click", () => void evaluateWhatIf());

void client
  .health()
  .then((h) => {
    el("status").textContent =
      h.status === "ok" ? `models: ${h.models_loaded.join(", ")}` : "no models loaded";
  })
  .catch(handleError);
