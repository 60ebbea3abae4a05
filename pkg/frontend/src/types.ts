/** Payload shapes of the review service API. */

export interface OpenAnomaly {
  anomaly_id: string;
  clip_id: string;
  prompt_id: string;
  raw_response: string | null;
  reason: string | null;
  options: string[];
}

export interface AnomaliesResponse {
  anomalies: OpenAnomaly[];
}

export interface RenormalizeResponse {
  resolved: number;
  still_open: number;
}

export interface ResolveResponse {
  anomaly_id: string;
  status: string;
  mode: string;
  option: string;
}

export interface IndexResponse {
  sessions: string[];
  metrics: string[];
  gaze: string[];
  annotation: boolean;
  prompts: string[];
}

export interface SyncReport {
  session_id: string;
  reference_stream: string;
  offsets_s: Record<string, number>;
  integer_offsets_s: Record<string, number>;
  peak_norm_corr: Record<string, number>;
  overlap_window: { start_s: number; end_s: number };
}

export interface SyncFeed {
  report: SyncReport;
  curves: Record<string, [number, number][]>;
}

export interface MetricsRow {
  frame: number;
  ifc: number | null;
  br: number;
  os: number;
}

export interface MetricsFeed {
  stream: string;
  rows: MetricsRow[];
  temporal_means: { ifc: number | null; br: number; os: number };
}

export interface GazeRow {
  timestamp_ns: number;
  frame_index: number | null;
  target: string;
  background_ratio: number;
  ratios: Record<string, number>;
}

export interface GazeFeed {
  stream: string;
  objects: string[];
  rows: GazeRow[];
}
