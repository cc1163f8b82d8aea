import {
  attributionBody,
  evaluateBody,
  pairBody,
  Scenario,
  sweepBody,
} from "./scenario";
import type {
  ApiError,
  AttributionPayload,
  EvaluatePayload,
  HardwarePayload,
  HealthPayload,
  ModelRow,
  PairPayload,
  Result,
  Snapshot,
  SweepPayload,
} from "./types";

const BASE = import.meta.env.VITE_API_BASE ?? "";

/** Thrown only when the service is unreachable, never for HTTP errors. */
export class OfflineError extends Error {}

async function getJson<T>(path: string, signal?: AbortSignal): Promise<T> {
  let resp: Response;
  try {
    resp = await fetch(`${BASE}${path}`, { signal });
  } catch (e) {
    if (e instanceof DOMException && e.name === "AbortError") throw e;
    throw new OfflineError(String(e));
  }
  if (!resp.ok) throw new OfflineError(`GET ${path}: ${resp.status}`);
  return resp.json();
}

async function postJson<T>(
  path: string, body: unknown, signal?: AbortSignal,
): Promise<Result<T>> {
  let resp: Response;
  try {
    resp = await fetch(`${BASE}${path}`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
      signal,
    });
  } catch (e) {
    if (e instanceof DOMException && e.name === "AbortError") throw e;
    throw new OfflineError(String(e));
  }
  if (resp.status === 400) {
    const doc = await resp.json();
    return { err: doc.detail as ApiError };
  }
  if (!resp.ok) throw new OfflineError(`POST ${path}: ${resp.status}`);
  return { ok: (await resp.json()) as T };
}

export interface Meta {
  health: HealthPayload;
  models: ModelRow[];
  hardware: HardwarePayload;
}

export async function fetchMeta(signal?: AbortSignal): Promise<Meta> {
  const [health, models, hardware] = await Promise.all([
    getJson<HealthPayload>("/api/health", signal),
    getJson<{ models: ModelRow[] }>("/api/models", signal),
    getJson<HardwarePayload>("/api/hardware", signal),
  ]);
  return { health, models: models.models, hardware };
}

export async function fetchSnapshot(
  scenario: Scenario, hw: HardwarePayload, signal?: AbortSignal,
): Promise<Snapshot> {
  const [pair, sweep, attribution, evaluate] = await Promise.all([
    postJson<PairPayload>("/api/pair", pairBody(scenario, hw), signal),
    postJson<SweepPayload>("/api/sweep", sweepBody(scenario, hw), signal),
    postJson<AttributionPayload>(
      "/api/attribution", attributionBody(scenario, hw), signal),
    postJson<EvaluatePayload>(
      "/api/evaluate", evaluateBody(scenario, hw), signal),
  ]);
  return { pair, sweep, attribution, evaluate };
}
