import { z } from "zod";

import type { HardwarePayload } from "./types";

// Detents mirror the published sweep contexts; the slider walks powers of two
// between 1k and 16M and snaps labels to these.
export const SWEEP_DETENTS = [
  1024, 16384, 32768, 131072, 1048576, 4194304, 16777216,
] as const;

export const MIN_CONTEXT_LOG2 = 10; // 1k
export const MAX_CONTEXT_LOG2 = 24; // 16M
export const GPU_CHOICES = [8, 16, 32, 64, 128] as const;

const power = (v: number) => Number.isInteger(Math.log2(v));

export const PlanSchema = z.object({
  tp: z.number().int().min(1).refine(power, "must be a power of two"),
  ep: z.number().int().min(1).refine(power, "must be a power of two"),
  pp: z.number().int().min(1),
  kv_mode: z.enum(["none", "kvp", "cp"]),
  kv_degree: z.number().int().min(1).refine(power, "must be a power of two"),
  dp: z.number().int().min(1).refine(power, "must be a power of two"),
});

export type Plan = z.infer<typeof PlanSchema>;

export const ScenarioSchema = z.object({
  model: z.string().min(1),
  gpus: z.number().int().min(1),
  context: z.number().int().min(1 << MIN_CONTEXT_LOG2).max(1 << MAX_CONTEXT_LOG2),
  q: z.number().min(1).max(6),
  hbmCapMult: z.number().min(0.75).max(1.25),
  hbmBwMult: z.number().min(0.75).max(1.25),
  mode: z.enum(["auto", "manual"]),
  plan: PlanSchema,
});

export type Scenario = z.infer<typeof ScenarioSchema>;

export const DEFAULT_PLAN: Plan = {
  tp: 1, ep: 8, pp: 1, kv_mode: "kvp", kv_degree: 64, dp: 1,
};

export const DEFAULT_SCENARIO: Scenario = {
  model: "deepseek-v3",
  gpus: 64,
  context: 131072,
  q: 5,
  hbmCapMult: 1,
  hbmBwMult: 1,
  mode: "auto",
  plan: DEFAULT_PLAN,
};

/** Same admissibility rules the server enforces, for inline warnings. */
export function planProblem(s: Scenario): string | null {
  if (s.mode !== "manual") return null;
  const p = s.plan;
  if (p.kv_mode === "none" && p.kv_degree !== 1) {
    return "kv_degree must be 1 when kv_mode is none";
  }
  if (p.ep > p.tp * p.kv_degree) {
    return `ep=${p.ep} exceeds tp×kv_degree=${p.tp * p.kv_degree}`;
  }
  const total = p.tp * p.pp * p.kv_degree * p.dp;
  if (total !== s.gpus) {
    return `tp×pp×kv_degree×dp = ${total}, cluster has ${s.gpus}`;
  }
  return null;
}

// --- URL round trip ------------------------------------------------------

export function scenarioToParams(s: Scenario): URLSearchParams {
  const p = new URLSearchParams();
  p.set("m", s.model);
  p.set("g", String(s.gpus));
  p.set("c", String(s.context));
  p.set("q", String(s.q));
  if (s.hbmCapMult !== 1) p.set("hc", String(s.hbmCapMult));
  if (s.hbmBwMult !== 1) p.set("hb", String(s.hbmBwMult));
  if (s.mode === "manual") {
    p.set("mode", "manual");
    const pl = s.plan;
    p.set("plan", `${pl.tp},${pl.ep},${pl.pp},${pl.kv_mode},${pl.kv_degree},${pl.dp}`);
  }
  return p;
}

export function scenarioFromParams(params: URLSearchParams): Scenario {
  const num = (key: string, fallback: number) => {
    const raw = params.get(key);
    const v = raw == null ? NaN : Number(raw);
    return Number.isFinite(v) ? v : fallback;
  };
  let plan = DEFAULT_PLAN;
  const rawPlan = params.get("plan");
  if (rawPlan) {
    const [tp, ep, pp, kv_mode, kv_degree, dp] = rawPlan.split(",");
    const parsed = PlanSchema.safeParse({
      tp: Number(tp), ep: Number(ep), pp: Number(pp),
      kv_mode, kv_degree: Number(kv_degree), dp: Number(dp),
    });
    if (parsed.success) plan = parsed.data;
  }
  const candidate: Scenario = {
    model: params.get("m") ?? DEFAULT_SCENARIO.model,
    gpus: num("g", DEFAULT_SCENARIO.gpus),
    context: num("c", DEFAULT_SCENARIO.context),
    q: num("q", DEFAULT_SCENARIO.q),
    hbmCapMult: num("hc", 1),
    hbmBwMult: num("hb", 1),
    mode: params.get("mode") === "manual" ? "manual" : "auto",
    plan,
  };
  const checked = ScenarioSchema.safeParse(candidate);
  return checked.success ? checked.data : DEFAULT_SCENARIO;
}

// --- request bodies ------------------------------------------------------

/** Override bytes are multiples of server-reported base numbers, never
 *  client-side constants. */
export function overridesFor(
  s: Scenario, hw: HardwarePayload,
): Record<string, number> | undefined {
  const out: Record<string, number> = {};
  if (s.hbmCapMult !== 1) {
    out.hbm_capacity_bytes = hw.hardware.hbm_capacity_bytes * s.hbmCapMult;
  }
  if (s.hbmBwMult !== 1) {
    out.hbm_bandwidth_bytes_per_s =
      hw.hardware.hbm_bandwidth_bytes_per_s * s.hbmBwMult;
  }
  return Object.keys(out).length ? out : undefined;
}

type Body = Record<string, unknown>;

export function evaluateBody(s: Scenario, hw: HardwarePayload): Body {
  const body: Body = {
    model: s.model,
    context_length: s.context,
    num_gpus: s.gpus,
    overrides: overridesFor(s, hw),
  };
  if (s.mode === "manual") body.plan = s.plan;
  return body;
}

export function pairBody(s: Scenario, hw: HardwarePayload): Body {
  return {
    model: s.model,
    q_values: [s.q],
    num_gpus: s.gpus,
    context_length: s.context,
    overrides: overridesFor(s, hw),
  };
}

export function sweepBody(s: Scenario, hw: HardwarePayload): Body {
  return {
    model: s.model,
    q: s.q,
    num_gpus: s.gpus,
    contexts: [...SWEEP_DETENTS],
    overrides: overridesFor(s, hw),
  };
}

export function attributionBody(s: Scenario, hw: HardwarePayload): Body {
  const contexts = s.context === 1024 ? [1024] : [1024, s.context];
  return {
    model: s.model,
    q: s.q,
    num_gpus: s.gpus,
    contexts,
    overrides: overridesFor(s, hw),
  };
}

export function scenarioLabel(s: Scenario): string {
  const ctx = `${Math.round(s.context / 1024)}k`;
  const plan = s.mode === "manual" ? " manual" : "";
  return `${s.model} @${s.gpus} ${ctx} q${s.q}${plan}`;
}
