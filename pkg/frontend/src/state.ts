/**
 * View state and its transition functions (pure; the DOM layer only
 * renders what these produce).
 *
 * Invariants maintained here:
 *  - highlights always come from the latest rank response; a response
 *    referencing paragraphs that no longer exist marks the view stale
 *    (the document changed under us) instead of rendering half-valid
 *    overlays;
 *  - an answer is never stored without its source-passage links;
 *  - arrow navigation cycles through highlighted paragraphs only.
 */

import { buildHighlights, stepHighlight, type HighlightView } from "./highlights.js";
import type { AnswerOut, PaperOut, RankedHitOut } from "./types.js";

export type Tab = "text-search" | "semantic-search" | "query" | "retrieval" | "checklist";

export interface PassageLink {
  index: number;
  paragraphId: string;
  text: string;
}

export interface AnswerView {
  text: string;
  refused: boolean;
  /** one clickable cross-reference per passage sent to the model */
  links: PassageLink[];
}

export interface ViewState {
  libraryId: string | null;
  paperId: string | null;
  tab: Tab;
  retrievalId: string | null;
  highlights: HighlightView[];
  currentHighlight: string | null;
  stale: boolean;
  answer: AnswerView | null;
}

export function initialState(): ViewState {
  return {
    libraryId: null,
    paperId: null,
    tab: "text-search",
    retrievalId: null,
    highlights: [],
    currentHighlight: null,
    stale: false,
    answer: null,
  };
}

export function selectPaper(state: ViewState, paperId: string | null): ViewState {
  return {
    ...state,
    paperId,
    highlights: [],
    currentHighlight: null,
    stale: false,
  };
}

export function selectTab(state: ViewState, tab: Tab): ViewState {
  return { ...state, tab };
}

export function selectRetrieval(state: ViewState, retrievalId: string | null): ViewState {
  return { ...state, retrievalId };
}

/** Replace the highlight set with the latest rank response, wholesale. */
export function applyRankResponse(
  state: ViewState,
  hits: RankedHitOut[],
  knownParagraphIds: Set<string>,
): ViewState {
  const missing = hits.some((h) => !knownParagraphIds.has(h.paragraph_id));
  if (missing) {
    return { ...state, highlights: [], currentHighlight: null, stale: true };
  }
  const highlights = buildHighlights(hits);
  const currentHighlight =
    highlights.find((h) => h.paragraphId === state.currentHighlight)?.paragraphId ??
    highlights[0]?.paragraphId ??
    null;
  return { ...state, highlights, currentHighlight, stale: false };
}

/** The ± click updates the badge immediately; the re-rank reconciles it. */
export function applyOptimisticLabel(
  state: ViewState,
  paragraphId: string,
  polarity: "positive" | "negative",
): ViewState {
  return {
    ...state,
    highlights: state.highlights.map((h) =>
      h.paragraphId === paragraphId ? { ...h, pendingLabel: polarity } : h,
    ),
  };
}

export function navigateHighlights(state: ViewState, direction: 1 | -1): ViewState {
  return {
    ...state,
    currentHighlight: stepHighlight(state.highlights, state.currentHighlight, direction),
  };
}

/**
 * Store an answer together with its cross-reference links. The links are
 * exactly the passages the service reports as sent to the model; an
 * answer without them is never representable.
 */
export function applyAnswer(state: ViewState, answer: AnswerOut): ViewState {
  const links = answer.used_passages.map((p) => ({
    index: p.index,
    paragraphId: p.paragraph_id,
    text: p.text,
  }));
  return { ...state, answer: { text: answer.text, refused: answer.refused, links } };
}

export function clearAnswer(state: ViewState): ViewState {
  return { ...state, answer: null };
}

export function paragraphIdsOf(paper: PaperOut): Set<string> {
  const ids = new Set<string>();
  for (const section of paper.sections) {
    for (const paragraph of section.paragraphs) ids.add(paragraph.id);
  }
  return ids;
}
