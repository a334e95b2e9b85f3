/** Wire types for the suggestion-service HTTP API. */

export interface SuggestionRequest {
  context: string[];
  attribute?: string | null;
  value?: unknown;
  n?: number;
  method?: "beam" | "sample";
  temperature?: number;
  seed?: number;
}

export interface Suggestion {
  text: string;
  attribute: string;
  score: number;
}

export interface SuggestionResponse {
  suggestions: Suggestion[];
  model_id: string;
  warnings: string[];
}

export interface AttributesResponse {
  attribute: string;
  values: string[];
  frame_inventory: string[];
  auto_modes: { "auto-rerank": boolean; "auto-predict": boolean };
}

export interface HealthResponse {
  status: string;
  model_id: string;
}

export interface ApiError {
  code: string;
  message: string;
}

/** Where a story sentence came from. */
export type Provenance = "user" | "suggestion" | "suggestion-edited";

export interface StorySentence {
  text: string;
  provenance: Provenance;
}

/** One rendered suggestion: text plus the attribute label it was generated for. */
export interface SuggestionCard {
  text: string;
  attributeLabel: string;
  score: number;
}
