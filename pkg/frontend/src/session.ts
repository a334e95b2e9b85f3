/** Session state and its pure update operations.
 *
 * The state is a plain serializable object: every mutation returns a new
 * state, rendering is a pure function of it, and export/import round-trips
 * through JSON preserving provenance tags.
 */

import type { ApiClient } from "./client.js";
import type {
  StorySentence,
  Suggestion,
  SuggestionCard,
  SuggestionResponse,
} from "./types.js";

export interface AttributeSpec {
  attribute?: string;
  value?: unknown;
  method?: "beam" | "sample";
  temperature?: number;
  seed?: number;
}

export interface SessionState {
  endpoint: string;
  story: StorySentence[];
  attributeSpec: AttributeSpec;
  cards: SuggestionCard[];
  lastResponse: SuggestionResponse | null;
  warnings: string[];
  error: string | null;
}

const EXPORT_VERSION = 1;

export function newSession(endpoint: string): SessionState {
  return {
    endpoint,
    story: [],
    attributeSpec: {},
    cards: [],
    lastResponse: null,
    warnings: [],
    error: null,
  };
}

export function writeSentence(state: SessionState, text: string): SessionState {
  const trimmed = text.trim();
  if (!trimmed) return state;
  return {
    ...state,
    story: [...state.story, { text: trimmed, provenance: "user" }],
  };
}

export function selectAttribute(
  state: SessionState,
  spec: AttributeSpec,
): SessionState {
  return { ...state, attributeSpec: spec };
}

function toCards(suggestions: Suggestion[]): SuggestionCard[] {
  return suggestions.map((s) => ({
    text: s.text,
    attributeLabel: s.attribute,
    score: s.score,
  }));
}

/** POST the current story as context; on failure keep prior cards and set a
 * non-blocking error banner. */
export async function fetchSuggestions(
  state: SessionState,
  client: ApiClient,
  n = 3,
): Promise<SessionState> {
  if (state.story.length < 1) {
    return { ...state, error: "write at least one sentence first" };
  }
  const spec = state.attributeSpec;
  try {
    const response = await client.suggest({
      context: state.story.map((s) => s.text),
      attribute: spec.attribute,
      value: spec.value,
      n,
      method: spec.method ?? "beam",
      temperature: spec.temperature ?? 0.6,
      seed: spec.seed ?? 0,
    });
    return {
      ...state,
      cards: toCards(response.suggestions),
      lastResponse: response,
      warnings: response.warnings,
      error: null,
    };
  } catch (err) {
    return { ...state, error: err instanceof Error ? err.message : String(err) };
  }
}

/** Append the chosen card's text (optionally edited) to the story and clear
 * the suggestion panel. Out-of-range indices are a no-op. */
export function acceptSuggestion(
  state: SessionState,
  index: number,
  edit?: string,
): SessionState {
  const card = state.cards[index];
  if (!card) {
    console.warn(`acceptSuggestion: no card at index ${index}`);
    return state;
  }
  const edited = edit !== undefined && edit !== card.text;
  const sentence: StorySentence = {
    text: edited ? edit : card.text,
    provenance: edited ? "suggestion-edited" : "suggestion",
  };
  return { ...state, story: [...state.story, sentence], cards: [] };
}

export function exportSession(state: SessionState): string {
  return JSON.stringify({ version: EXPORT_VERSION, state });
}

export function importSession(json: string): SessionState {
  const parsed = JSON.parse(json) as { version?: number; state?: SessionState };
  if (parsed.version !== EXPORT_VERSION || !parsed.state) {
    throw new Error(`unsupported session export (version ${parsed.version})`);
  }
  const s = parsed.state;
  if (!Array.isArray(s.story) || typeof s.endpoint !== "string") {
    throw new Error("malformed session export");
  }
  for (const sent of s.story) {
    if (!["user", "suggestion", "suggestion-edited"].includes(sent.provenance)) {
      throw new Error(`unknown provenance tag: ${sent.provenance}`);
    }
  }
  return s;
}
