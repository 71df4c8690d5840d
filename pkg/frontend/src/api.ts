/**
 * Typed client for the analysis service. All data shown anywhere in
 * the UI flows through these calls; the client does no math beyond
 * decoding JSON.
 */

import type { ServiceNumber } from "./format.js";

export interface ErrorEnvelope {
  type: string;
  message: string;
  detail: Record<string, unknown>;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public envelope: ErrorEnvelope,
  ) {
    super(`${envelope.type}: ${envelope.message}`);
  }
}

export interface DatasetSummary {
  n: number;
  columns: string[];
  fingerprint: string;
  region_ids: string[];
  fitting_rows: number;
  exclusions: { flagged_rows: string[]; reason: string };
}

export interface FeatureList {
  columns: string[];
  n: number;
}

export interface FeatureProfile {
  name: string;
  bin_edges: ServiceNumber[];
  counts: number[];
  skewness: ServiceNumber;
  ks_statistic: ServiceNumber;
  ks_p: ServiceNumber;
  suggested_transforms: string[];
  n_values: number;
  mean: ServiceNumber;
  std: ServiceNumber;
  minimum: ServiceNumber;
  maximum: ServiceNumber;
}

export interface VifResponse {
  names: string[];
  values: ServiceNumber[];
  severe: boolean[];
  collinear: boolean[];
}

export interface CorrelationPair {
  x_name: string;
  y_name: string;
  r: ServiceNumber;
  p: ServiceNumber;
  flagged_strong: boolean;
  threshold: number;
}

export interface CorrelationsResponse {
  results: CorrelationPair[];
}

export interface QuantileResponse {
  mode: "quantile";
  classes: number[];
  boundaries: ServiceNumber[];
  k_requested: number;
  k_effective: number;
  reduced: boolean;
  region_ids: string[];
}

export interface BivariateResponse {
  mode: "bivariate";
  rows: number[];
  cols: number[];
  zones: ("diagonal" | "above" | "below")[];
  k: number;
  dep_boundaries: ServiceNumber[];
  ind_boundaries: ServiceNumber[];
  region_ids: string[];
}

export interface ModelSpecJson {
  dependent: string;
  independents: string[];
  family: "ols" | "gwr" | "mgwr";
  kernel: string;
  bandwidth_mode: string;
  convergence: { tolerance: number; max_iterations: number };
}

export interface JobJson {
  job_id: number;
  status: "queued" | "running" | "converged" | "failed" | "cancelled";
  spec: ModelSpecJson;
  progress: Record<string, ServiceNumber | string>;
  history: [string, number][];
  result: string | null;
  error: ErrorEnvelope | null;
}

export interface ModelSummary {
  family: string;
  spec: ModelSpecJson;
  bandwidths: ServiceNumber[] | ServiceNumber | null;
  n: number;
  aicc: ServiceNumber;
  rss: ServiceNumber;
  sigma2: ServiceNumber;
  hat_trace: ServiceNumber;
  enp_per_surface: ServiceNumber[];
  converged: boolean;
  iterations: number;
  search: {
    bandwidth: number;
    score: ServiceNumber;
    boundary: boolean;
    evaluations: number;
  }[];
}

export interface SurfaceResponse {
  surface: string;
  region_ids: string[];
  values: ServiceNumber[];
  standardized: ServiceNumber[];
  se: ServiceNumber[];
  t: ServiceNumber[];
}

export interface DiagnosticsResponse {
  region_ids: string[];
  aicc: ServiceNumber;
  r2: ServiceNumber;
  adj_r2: ServiceNumber;
  local_r2: {
    values: ServiceNumber[];
    clamped: ServiceNumber[];
    clamp_flags: boolean[];
    undefined_flags: boolean[];
    bandwidth_used: ServiceNumber | null;
  };
  cooks_d: {
    values: ServiceNumber[];
    mask: boolean[];
    threshold: ServiceNumber;
    infinite_flags: boolean[];
  };
  std_residuals: {
    values: ServiceNumber[];
    labels: string[];
    convention: string;
  };
  morans_i_residuals: {
    statistic: ServiceNumber;
    pseudo_p: ServiceNumber;
    permutations: number;
    seed: number;
  };
  significance: {
    surfaces: string[];
    mask: boolean[][];
    t_values: ServiceNumber[][];
    adjusted_alpha: ServiceNumber[];
    critical_t: ServiceNumber[];
    se_zero_flags: boolean[][];
    xi: number;
  };
}

export interface ClusterJson {
  cluster_id: string;
  sign: "positive" | "negative";
  region_ids: string[];
  size: number;
  mean_coefficient: ServiceNumber;
  centroid: ServiceNumber[];
  extent: ServiceNumber[];
  location_identifier: string;
}

export interface ClustersResponse {
  surface: string;
  positive_clusters: ClusterJson[];
  negative_clusters: ClusterJson[];
  isolated: string[];
  zero_flagged: string[];
}

export interface ParagraphJson {
  paragraph_id: string;
  template_id: string;
  role: "overview" | "detail" | "note";
  text: string;
  anchors: string[];
  data: [string, ServiceNumber][];
  default_identifier: string | null;
  identifier: string | null;
  parent_id: string | null;
  keyphrase_regions: string[];
}

export interface NarrativeDocJson {
  kind: string;
  template_version: string;
  map_anchors: [string, string[]][];
  edits: [string, string][];
  paragraphs: ParagraphJson[];
}

export interface ContextFetchResponse {
  resolution: string;
  regions: { region_id: string; title: string | null; revision: string; sections: number }[];
  warnings: string[];
}

export interface KeyphrasesResponse {
  n: number;
  entries: {
    phrase: string;
    score: ServiceNumber;
    topic: string | null;
    region_ids: string[];
  }[];
}

export interface ParagraphMatchJson {
  region_id: string;
  topic: string;
  paragraph: string;
  offsets: [number, number][];
}

export interface ParagraphsResponse {
  phrase: string;
  matches: ParagraphMatchJson[];
}

export interface ReportItemJson {
  kind: "paragraph" | "map_figure" | "chart_figure";
  content: string;
  palette: string | null;
  source_module: string;
  state_hash: string;
}

export interface ReportJson {
  title: string;
  items: ReportItemJson[];
  created_at: string;
  modified_at: string;
  template_version: string;
  noop?: boolean;
}

export interface GeoJsonFeature {
  type: "Feature";
  id?: string | number;
  properties: Record<string, unknown>;
  geometry: {
    type: "Polygon" | "MultiPolygon";
    coordinates: number[][][] | number[][][][];
  };
}

export interface GeoJson {
  type: "FeatureCollection";
  features: GeoJsonFeature[];
}

export type Fetcher = (path: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  private fetcher: Fetcher;

  constructor(baseUrl = "", fetcher?: Fetcher) {
    this.fetcher = fetcher ?? ((path, init) => fetch(baseUrl + path, init));
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetcher(path, init);
    const body = await response.json();
    if (!response.ok) {
      throw new ApiError(response.status, body as ErrorEnvelope);
    }
    return body as T;
  }

  get<T>(path: string): Promise<T> {
    return this.request<T>(path);
  }

  post<T>(path: string, body?: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
  }

  datasetSummary(): Promise<DatasetSummary> {
    return this.get("/dataset/summary");
  }

  datasetGeoJson(): Promise<GeoJson> {
    return this.get("/dataset/geojson");
  }

  features(): Promise<FeatureList> {
    return this.get("/features");
  }

  featureProfile(name: string): Promise<FeatureProfile> {
    return this.get(`/features/${encodeURIComponent(name)}/profile`);
  }

  vif(names: string[]): Promise<VifResponse> {
    return this.post("/vif", { names });
  }

  correlations(names: string[]): Promise<CorrelationsResponse> {
    return this.post("/correlations", { names });
  }

  classifyQuantile(column: string, k: number): Promise<QuantileResponse> {
    return this.post("/classify", { column, k });
  }

  classifyBivariate(
    dependent: string,
    independent: string,
    k: number,
  ): Promise<BivariateResponse> {
    return this.post("/classify", { dependent, independent, k });
  }

  submitJob(spec: Partial<ModelSpecJson> & { bandwidth?: number }): Promise<JobJson> {
    return this.post("/jobs", spec);
  }

  job(jobId: number): Promise<JobJson> {
    return this.get(`/jobs/${jobId}`);
  }

  cancelJob(jobId: number): Promise<JobJson> {
    return this.post(`/jobs/${jobId}/cancel`);
  }

  model(): Promise<ModelSummary> {
    return this.get("/model");
  }

  surfaces(): Promise<{ surfaces: string[] }> {
    return this.get("/surfaces");
  }

  surface(name: string): Promise<SurfaceResponse> {
    return this.get(`/surfaces/${encodeURIComponent(name)}`);
  }

  diagnostics(): Promise<DiagnosticsResponse> {
    return this.get("/diagnostics");
  }

  explanations(): Promise<Record<string, string>> {
    return this.get("/explanations");
  }

  clusters(surface: string): Promise<ClustersResponse> {
    return this.get(`/clusters/${encodeURIComponent(surface)}`);
  }

  narrativeCoefficient(surface: string): Promise<NarrativeDocJson> {
    return this.get(`/narratives/coefficient/${encodeURIComponent(surface)}`);
  }

  narrativeDiagnostic(kind: string): Promise<NarrativeDocJson> {
    return this.get(`/narratives/diagnostic/${encodeURIComponent(kind)}`);
  }

  narrativeFeature(name: string): Promise<NarrativeDocJson> {
    return this.get(`/narratives/feature/${encodeURIComponent(name)}`);
  }

  editIdentifier(
    doc: string,
    paragraphId: string,
    label: string,
  ): Promise<NarrativeDocJson> {
    return this.post("/narratives/edits", {
      doc,
      paragraph_id: paragraphId,
      label,
    });
  }

  contextFetch(
    pages: Record<string, string>,
    resolution: string,
  ): Promise<ContextFetchResponse> {
    return this.post("/context/fetch", { pages, resolution });
  }

  keyphrases(regionIds?: string[]): Promise<KeyphrasesResponse> {
    const query = regionIds?.length
      ? `?regions=${encodeURIComponent(regionIds.join(","))}`
      : "";
    return this.get(`/keyphrases${query}`);
  }

  paragraphs(phrase: string, regionIds?: string[]): Promise<ParagraphsResponse> {
    const extra = regionIds?.length
      ? `&regions=${encodeURIComponent(regionIds.join(","))}`
      : "";
    return this.get(`/paragraphs?phrase=${encodeURIComponent(phrase)}${extra}`);
  }

  createReport(title: string): Promise<ReportJson> {
    return this.post("/report", { title });
  }

  report(): Promise<ReportJson> {
    return this.get("/report");
  }

  mutateReport(
    action: "add" | "edit" | "delete" | "move_up" | "move_down",
    payload: {
      item?: Partial<ReportItemJson>;
      index?: number;
    },
  ): Promise<ReportJson> {
    return this.post("/report/mutate", { action, payload });
  }

  async reportExport(): Promise<Blob> {
    const response = await this.fetcher("/report/export");
    if (!response.ok) {
      throw new ApiError(response.status, (await response.json()) as ErrorEnvelope);
    }
    return response.blob();
  }

  async stateSave(): Promise<Blob> {
    const response = await this.fetcher("/state/save");
    if (!response.ok) {
      throw new ApiError(response.status, (await response.json()) as ErrorEnvelope);
    }
    return response.blob();
  }

  stateLoad(blob: string): Promise<Record<string, unknown>> {
    return this.request("/state/load", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: blob,
    });
  }

  async uploadDataset(raw: string | Blob): Promise<DatasetSummary> {
    const response = await this.fetcher("/dataset", {
      method: "POST",
      headers: { "content-type": "application/geo+json" },
      body: raw,
    });
    const body = await response.json();
    if (!response.ok) {
      throw new ApiError(response.status, body as ErrorEnvelope);
    }
    return body as DatasetSummary;
  }
}
