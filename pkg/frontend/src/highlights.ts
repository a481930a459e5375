/**
 * Highlight view models for the document pane.
 *
 * Every ranked hit becomes a tinted overlay whose hue is a strictly
 * monotone function of its similarity score, plus a score badge
 * ("83.3% — +") whose -/+ buttons feed relevance labels back to the
 * active retrieval. Navigation arrows cycle through highlighted
 * paragraphs only.
 */

import type { Polarity, RankedHitOut } from "./types.js";

export interface HighlightView {
  paragraphId: string;
  rank: number;
  score: number;
  displayScore: string;
  hue: number;
  color: string;
  /** optimistic local label shown until the next rank response lands */
  pendingLabel: Exclude<Polarity, "clear"> | null;
}

function clamp01(x: number): number {
  return Math.min(Math.max(x, 0), 1);
}

/**
 * Hue in degrees, strictly decreasing in score: weak matches render
 * yellow (60) and strong matches orange-red (0). Equal scores always get
 * equal hue.
 */
export function hueForScore(score: number): number {
  return 60 * (1 - clamp01(score));
}

export function colorForScore(score: number): string {
  return `hsl(${hueForScore(score).toFixed(2)}deg 95% 65% / 0.45)`;
}

export function buildHighlights(hits: RankedHitOut[]): HighlightView[] {
  return hits.map((hit) => ({
    paragraphId: hit.paragraph_id,
    rank: hit.rank,
    score: hit.score,
    displayScore: hit.display_score,
    hue: hueForScore(hit.score),
    color: colorForScore(hit.score),
    pendingLabel: null,
  }));
}

export function badgeText(view: HighlightView): string {
  return `${view.displayScore} —`;
}

/**
 * Next/previous highlighted paragraph for the arrow buttons; cycles and
 * never leaves the highlight set.
 */
export function stepHighlight(
  highlights: HighlightView[],
  current: string | null,
  direction: 1 | -1,
): string | null {
  if (highlights.length === 0) return null;
  const index = highlights.findIndex((h) => h.paragraphId === current);
  if (index === -1) return highlights[0].paragraphId;
  const next = (index + direction + highlights.length) % highlights.length;
  return highlights[next].paragraphId;
}
