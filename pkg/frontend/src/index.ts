export { ApiClient, ServiceError } from "./client.js";
export type { FetchLike } from "./client.js";
export {
  acceptSuggestion,
  exportSession,
  fetchSuggestions,
  importSession,
  newSession,
  selectAttribute,
  writeSentence,
} from "./session.js";
export type { AttributeSpec, SessionState } from "./session.js";
export { renderCard, renderSession } from "./render.js";
export type {
  ApiError,
  AttributesResponse,
  HealthResponse,
  Provenance,
  StorySentence,
  Suggestion,
  SuggestionCard,
  SuggestionRequest,
  SuggestionResponse,
} from "./types.js";
