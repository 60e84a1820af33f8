export interface ChatRequest {
  session_id?: string;
  message: string;
}

export interface RowsPayload {
  columns: string[];
  data: unknown[][];
}

export interface ApiError {
  code: string;
  message: string;
}

export interface ChatResponse {
  session_id: string;
  answer_text: string;
  sql: string | null;
  rows: RowsPayload | null;
  map_id: string | null;
  assumptions: string[];
  error: ApiError | null;
}

export interface GeoFeature {
  type: "Feature";
  geometry: { type: string; coordinates: unknown };
  properties: Record<string, unknown>;
}

export interface GeoFeatureDocument {
  type: "FeatureCollection";
  features: GeoFeature[];
}

// One chat bubble; assistant messages mirror ChatResponse fields one-to-one.
export interface UiMessage {
  role: "user" | "assistant";
  text: string;
  table?: RowsPayload;
  mapId?: string;
  sql?: string;
  assumptions?: string[];
  error?: ApiError;
  retryText?: string; // set on transport failures so the bubble can offer a retry
}
