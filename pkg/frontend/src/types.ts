/** Wire types mirroring the gateway's JSON contract. */

export type FeatureKind = "binary" | "ordinal" | "numeric";

export interface FeatureDef {
  id: string;
  kind: FeatureKind;
  params: { arity?: number; lo?: number; hi?: number };
  display_name: string;
}

export interface Schema {
  version: number;
  features: FeatureDef[];
}

export interface Prediction {
  subject_id: string;
  score: number;
  vulnerable: boolean;
  alpha: number;
  model_version: number;
}

export interface AlertDetailFeature {
  feature_id: string;
  deviation: number;
}

export interface AlertEvent {
  alert_id: number;
  kind: "ENTERED_DANGER_ZONE" | "LOCALITY_OUTLIER";
  subject_id: string;
  detail: {
    features?: AlertDetailFeature[];
    previous_score?: number;
    new_score?: number;
    previous_version?: number;
  };
  model_version: number;
  timestamp: number;
}

export interface ErrorInfo {
  code: string;
  message: string;
  field: string | null;
}

export interface Envelope<T> {
  request_id: string;
  agent_id: string | null;
  operation: string;
  result?: T;
  error?: ErrorInfo;
}

export interface RecordPayload {
  subject_id: string;
  locality_id: string;
  values: number[];
  collected_at: number;
}

export interface EnrollResult {
  prediction: Prediction;
  outlier_alert: AlertEvent | null;
}

export interface IncidentResult {
  alerts: AlertEvent[];
  model_version: number;
  trained_on: number;
}

export interface AlertsResult {
  alerts: AlertEvent[];
  cursor: number;
}

export interface Peer {
  subject_id: string;
  similarity: number;
}

export interface PeersResult {
  peers: Peer[];
}

export interface ClusterSubject {
  subject_id: string;
  x: number;
  y: number;
  cluster: number;
  vulnerable: boolean;
}

export interface ClusterViewResult {
  insufficient: boolean;
  subjects: ClusterSubject[];
  pca_dims?: number;
  clusters?: number;
}

export interface HistogramBin {
  lo: number;
  hi: number;
  count: number;
}

export interface SimilarityStatsResult {
  insufficient: boolean;
  n_records?: number;
  duplicate_partner_fraction?: number;
  low_similarity_pair_fraction?: number;
  histogram?: HistogramBin[];
}
