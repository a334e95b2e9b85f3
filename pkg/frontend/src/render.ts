/** Rendering is a pure function of SessionState: the same state always
 * produces the same HTML, so a view rebuilt from an exported session is
 * identical to the original. */

import type { SessionState } from "./session.js";
import type { SuggestionCard } from "./types.js";

function escapeHtml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderCard(card: SuggestionCard, index: number): string {
  return [
    `<div class="card" data-index="${index}">`,
    `<span class="card-label">${escapeHtml(card.attributeLabel)}</span>`,
    `<span class="card-text">${escapeHtml(card.text)}</span>`,
    `<span class="card-score">${card.score.toFixed(3)}</span>`,
    `</div>`,
  ].join("");
}

export function renderSession(state: SessionState): string {
  const story = state.story
    .map(
      (s) =>
        `<p class="sentence" data-provenance="${s.provenance}">` +
        `${escapeHtml(s.text)}</p>`,
    )
    .join("");
  const cards = state.cards.map(renderCard).join("");
  const warnings = state.warnings
    .map((w) => `<div class="warning">${escapeHtml(w)}</div>`)
    .join("");
  const banner = state.error
    ? `<div class="error-banner">${escapeHtml(state.error)}</div>`
    : "";
  return [
    `<main>`,
    banner,
    `<section class="story">${story}</section>`,
    `<section class="suggestions">${cards}</section>`,
    warnings,
    `</main>`,
  ].join("");
}
