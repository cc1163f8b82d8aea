// Service payload shapes. Field names mirror the JSON exactly; anything the
// UI never reads is left out and tolerated via optional spread.

export interface HealthPayload {
  status: string;
  version: string;
  schema_version: number;
  calibration: string;
}

export interface ModelRow {
  name: string;
  is_moe: boolean;
  num_experts: number;
  top_k: number;
  sparsity: number;
  kv_layout: string;
  num_layers: number;
  d_model: number;
  total_params: number;
  active_params: number;
}

export interface HardwarePayload {
  hardware: {
    name: string;
    hbm_capacity_bytes: number;
    hbm_bandwidth_bytes_per_s: number;
    [key: string]: unknown;
  };
  override_fields: string[];
}

export interface PairRow {
  model: string;
  dense_model: string;
  q: number;
  num_experts: number;
  top_k: number;
  s: number;
  qs: number;
  feasible_moe: boolean;
  feasible_dense: boolean;
  plan_moe: string | null;
  plan_dense: string | null;
  reason_moe: string | null;
  reason_dense: string | null;
  batch_moe: number | null;
  batch_dense: number | null;
  reuse_moe: number | null;
  reuse_dense: number | null;
  routing_factor: number;
  capacity_factor: number | null;
  total_gap: number | null;
  subunit_expert_batch: boolean | null;
  infeasible_moe: boolean;
}

export interface PairPayload {
  schema_version: number;
  report: "pair";
  rows: PairRow[];
}

export interface SweepRow {
  context: number;
  context_label: string;
  feasible_moe: boolean;
  feasible_dense: boolean;
  batch_moe: number | null;
  batch_dense: number | null;
  tokens_per_s_moe: number | null;
  tokens_per_s_dense: number | null;
  tput_moe_rel: number | null;
  tput_dense_rel: number | null;
  speedup: number | null;
  plan_moe: string | null;
  plan_dense: string | null;
}

export interface SweepPayload {
  schema_version: number;
  report: "sweep";
  model: string;
  dense_model: string;
  q: number;
  anchor_context: number;
  anchor_tokens_per_s: number;
  rows: SweepRow[];
}

export interface AttributionRow {
  context: number;
  context_label: string;
  variant: "moe" | "dense";
  model: string;
  plan: string;
  batch: number;
  hbm_rel: number;
  compute_rel: number;
  comm_rel: number;
  hbm_s: number;
  compute_s: number;
  comm_s: number;
}

export interface AttributionPayload {
  schema_version: number;
  report: "attribution";
  model: string;
  dense_model: string;
  q: number;
  unit_s: number;
  gap_drivers: Record<string, string>;
  rows: AttributionRow[];
}

export interface EvaluatePayload {
  schema_version: number;
  report: "evaluate";
  model: string;
  context_length: number;
  num_gpus: number;
  calibration: string;
  autotuned: boolean;
  feasible: boolean;
  plan_label?: string;
  plan?: Record<string, unknown>;
  memory?: {
    budget_bytes: number;
    resident_weight_bytes: number;
    kv_bytes_per_seq_per_gpu: number;
    n_eff_max: number;
    feasible: boolean;
    batch_cluster: number;
    reason: string | null;
  };
  latency?: {
    t_compute: number;
    t_hbm: number;
    t_comm_exposed: number;
    t_token: number;
  } | null;
  throughput?: {
    tokens_per_s_cluster: number;
    tokens_per_s_per_gpu: number;
    pp_utilization: number;
    relative_pct: number | null;
  } | null;
  reuse?: {
    batch_replica: number;
    reuse_factor: number;
    routing_factor: number | null;
  } | null;
  reasons?: Record<string, string>;
}

export interface ApiError {
  error: string;
  field: string | null;
}

/** One endpoint's outcome: payload, scenario-level refusal, or nothing yet. */
export type Result<T> = { ok: T } | { err: ApiError };

export interface Snapshot {
  pair: Result<PairPayload>;
  sweep: Result<SweepPayload>;
  attribution: Result<AttributionPayload>;
  evaluate: Result<EvaluatePayload>;
}
