/** Typed client for the estimation service.
 *
 * Every number the UI displays comes through this client; the fetch
 * implementation is injectable so tests run entirely from recorded
 * fixtures.
 */

import type {
  ClusterCounts,
  CompareResponse,
  ConsistencyCheck,
  ExceedanceResponse,
  FitOutcome,
  FitRequestBody,
  GateReport,
  JobInfo,
  RidgeResponse,
  SummariesResponse,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export interface DatasetUpload {
  dataset: File | Blob;
  geometry: File | Blob;
  covariates?: File | Blob;
  edges?: File | Blob;
  survey?: string;
  indicator?: string;
  referenceEstimate?: number;
  covariateLevel?: number;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly payload: unknown,
  ) {
    super(`service error ${status}`);
  }
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async getJson<T>(path: string): Promise<T> {
    const resp = await this.fetchFn(this.baseUrl + path);
    if (!resp.ok) {
      throw new ApiError(resp.status, await resp.json().catch(() => null));
    }
    return (await resp.json()) as T;
  }

  async createDataset(upload: DatasetUpload): Promise<{ dataset_id: string; levels: number[] }> {
    const form = new FormData();
    form.append("dataset", upload.dataset);
    form.append("geometry", upload.geometry);
    if (upload.covariates) form.append("covariates", upload.covariates);
    if (upload.edges) form.append("edges", upload.edges);
    if (upload.survey) form.append("survey", upload.survey);
    if (upload.indicator) form.append("indicator", upload.indicator);
    if (upload.referenceEstimate !== undefined) {
      form.append("reference_estimate", String(upload.referenceEstimate));
    }
    if (upload.covariateLevel !== undefined) {
      form.append("covariate_level", String(upload.covariateLevel));
    }
    const resp = await this.fetchFn(this.baseUrl + "/datasets", { method: "POST", body: form });
    if (!resp.ok) throw new ApiError(resp.status, await resp.json().catch(() => null));
    return (await resp.json()) as { dataset_id: string; levels: number[] };
  }

  clusters(datasetId: string, level: number): Promise<ClusterCounts> {
    return this.getJson(`/datasets/${datasetId}/clusters?level=${level}`);
  }

  consistency(datasetId: string): Promise<ConsistencyCheck> {
    return this.getJson(`/datasets/${datasetId}/consistency`);
  }

  gate(datasetId: string, level: number): Promise<GateReport> {
    return this.getJson(`/datasets/${datasetId}/gate?level=${level}`);
  }

  /** POST a fit; a 403 is a structured refusal, not an exception. */
  async requestFit(body: FitRequestBody): Promise<FitOutcome> {
    const resp = await this.fetchFn(this.baseUrl + "/fits", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (resp.status === 403) {
      return { kind: "refused", refusal: await resp.json() };
    }
    if (!resp.ok) throw new ApiError(resp.status, await resp.json().catch(() => null));
    return { kind: "accepted", job: await resp.json() };
  }

  job(jobId: string): Promise<JobInfo> {
    return this.getJson(`/jobs/${jobId}`);
  }

  summaries(fitId: string, point: "median" | "mean" = "median"): Promise<SummariesResponse> {
    return this.getJson(`/fits/${fitId}/summaries?point=${point}`);
  }

  exceedance(fitId: string, p0: number): Promise<ExceedanceResponse> {
    return this.getJson(`/fits/${fitId}/exceedance?p0=${p0}`);
  }

  ridge(fitId: string, selection: string): Promise<RidgeResponse> {
    return this.getJson(`/fits/${fitId}/ridge?selection=${encodeURIComponent(selection)}`);
  }

  compare(fitA: string, fitB: string, stat: string): Promise<CompareResponse> {
    return this.getJson(`/compare?fit_a=${fitA}&fit_b=${fitB}&stat=${stat}`);
  }

  /** Raw CSV bytes as text; the download button passes this through untouched. */
  async tabulation(fitId: string): Promise<string> {
    const resp = await this.fetchFn(`${this.baseUrl}/fits/${fitId}/tabulation`);
    if (!resp.ok) throw new ApiError(resp.status, null);
    return await resp.text();
  }

  async report(fitIds: string[], p0?: number): Promise<Record<string, unknown>> {
    const resp = await this.fetchFn(this.baseUrl + "/reports", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ fit_ids: fitIds, p0: p0 ?? null }),
    });
    if (!resp.ok) throw new ApiError(resp.status, await resp.json().catch(() => null));
    return (await resp.json()) as Record<string, unknown>;
  }
}
