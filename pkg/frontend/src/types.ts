/** Wire types mirroring the estimation service's JSON payloads. */

export interface AreaSummary {
  area_id: string;
  level: number;
  method: string;
  point: number | null;
  ci_low: number | null;
  ci_high: number | null;
  ci_width: number | null;
  cv: number | null;
  exceedance_p0: number | null;
  exceedance: number | null;
  flags: string[];
  seed: number | null;
  options: Record<string, unknown>;
}

export interface SummariesResponse {
  fit_id: string;
  method: string;
  level: number;
  seed: number;
  engine_version: string;
  summaries: AreaSummary[];
}

export interface GateReport {
  level: number;
  n_areas: number;
  n_no_data: number;
  n_low_info: number;
  verdicts: Record<string, string>;
  recommendation: string;
  messages: string[];
  excluded_area_ids: string[];
  message_version: string;
}

export interface ClusterCounts {
  level: number;
  areas: Record<string, { n_clusters: number; n_trials: number; n_successes: number }>;
}

export interface ConsistencyCheck {
  computed: number | null;
  reference: number | null;
  tolerance: number;
  status: "pass" | "fail" | "no_reference";
}

export interface JobInfo {
  id: string;
  kind: string;
  status: "queued" | "running" | "done" | "failed";
  request: Record<string, unknown>;
  result_path: string | null;
  error: Record<string, unknown> | null;
  created_at: string;
  started_at: string | null;
  finished_at: string | null;
  engine_version: string;
}

export interface FitAccepted {
  job_id: string;
  seed: number;
  engine_version: string;
}

export interface FitRefusal {
  refused: true;
  verdict: string;
  override_required?: boolean;
  messages: string[];
  gate: GateReport;
}

export type FitOutcome =
  | { kind: "accepted"; job: FitAccepted }
  | { kind: "refused"; refusal: FitRefusal };

export interface FitRequestBody {
  dataset_id: string;
  method: string;
  level: number;
  options: Record<string, unknown>;
  override: boolean;
  seed?: number;
}

export interface ExceedanceResponse {
  fit_id: string;
  p0: number;
  seed: number;
  exceedance: Record<string, number>;
}

export interface RidgeCurve {
  area_id: string;
  median: number;
  grid: number[];
  density: number[];
}

export interface RidgeResponse {
  fit_id: string;
  seed: number;
  selection: string;
  note: string | null;
  curves: RidgeCurve[];
}

export interface ComparePair {
  area_id: string;
  a: number;
  b: number;
}

export interface CompareResponse {
  fit_a: string;
  fit_b: string;
  stat: string;
  method_a: string;
  method_b: string;
  pairs: ComparePair[];
  unmatched: string[];
}

export interface FeatureCollection {
  type: "FeatureCollection";
  features: Array<{
    type: "Feature";
    properties: { id: string; name: string; level: number; parent_id: string | null };
    geometry: { type: string; coordinates: unknown } | null;
  }>;
}

export type Stat = "point" | "ci_width" | "cv" | "exceedance";

export const STAT_LABELS: Record<Stat, string> = {
  point: "point estimate",
  ci_width: "95% interval width",
  cv: "coefficient of variation (%)",
  exceedance: "exceedance probability",
};
