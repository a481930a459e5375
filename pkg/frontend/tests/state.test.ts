import { describe, expect, it } from "vitest";

import { buildChecklist } from "../src/checklist.js";
import {
  applyAnswer,
  applyOptimisticLabel,
  applyRankResponse,
  initialState,
  navigateHighlights,
  paragraphIdsOf,
  selectPaper,
} from "../src/state.js";
import type { AnswerOut, PaperOut, RankedHitOut, RetrievalOut } from "../src/types.js";

function paper(ids: string[]): PaperOut {
  return {
    id: "paper1",
    metadata: { title: "t", abstract: "", authors: [], date: null, doi: null },
    sections: [
      {
        heading: "s",
        paragraphs: ids.map((id, i) => ({
          id,
          paper_id: "paper1",
          section_index: 0,
          para_index: i,
          text: `text ${id}`,
          edited: false,
          duplicate: false,
        })),
      },
    ],
    source_format: "plaintext",
    needs_review: false,
    original_uri: null,
    side_records: [],
  };
}

function hits(ids: string[], scores?: number[]): RankedHitOut[] {
  return ids.map((id, i) => ({
    rank: i + 1,
    paragraph_id: id,
    score: scores?.[i] ?? 0.9 - i * 0.1,
    display_score: "x%",
    text: `text ${id}`,
  }));
}

describe("applyRankResponse", () => {
  it("replaces the highlight set with the latest response", () => {
    const doc = paper(["a", "b", "c"]);
    let state = selectPaper(initialState(), doc.id);
    state = applyRankResponse(state, hits(["a", "b"]), paragraphIdsOf(doc));
    expect(state.highlights.map((h) => h.paragraphId)).toEqual(["a", "b"]);
    state = applyRankResponse(state, hits(["c"]), paragraphIdsOf(doc));
    expect(state.highlights.map((h) => h.paragraphId)).toEqual(["c"]);
    expect(state.stale).toBe(false);
  });

  it("marks the view stale when a ranked paragraph no longer exists", () => {
    const doc = paper(["a", "b"]);
    let state = selectPaper(initialState(), doc.id);
    state = applyRankResponse(state, hits(["a", "ghost"]), paragraphIdsOf(doc));
    expect(state.stale).toBe(true);
    expect(state.highlights).toEqual([]);
    expect(state.currentHighlight).toBeNull();
  });

  it("keeps the current highlight when it survives the re-rank", () => {
    const doc = paper(["a", "b", "c"]);
    let state = selectPaper(initialState(), doc.id);
    state = applyRankResponse(state, hits(["a", "b"]), paragraphIdsOf(doc));
    state = navigateHighlights(state, 1);
    expect(state.currentHighlight).toBe("b");
    state = applyRankResponse(state, hits(["b", "c"]), paragraphIdsOf(doc));
    expect(state.currentHighlight).toBe("b");
  });
});

describe("optimistic labeling", () => {
  it("updates the badge immediately and reconciles on the next response", () => {
    const doc = paper(["a", "b"]);
    let state = selectPaper(initialState(), doc.id);
    state = applyRankResponse(state, hits(["a", "b"]), paragraphIdsOf(doc));
    state = applyOptimisticLabel(state, "a", "negative");
    expect(state.highlights[0].pendingLabel).toBe("negative");
    expect(state.highlights[1].pendingLabel).toBeNull();
    // fresh rank response clears the pending marker
    state = applyRankResponse(state, hits(["b", "a"]), paragraphIdsOf(doc));
    expect(state.highlights.every((h) => h.pendingLabel === null)).toBe(true);
  });
});

describe("navigation", () => {
  it("cycles only through highlighted paragraphs", () => {
    const doc = paper(["a", "b", "c", "d"]);
    let state = selectPaper(initialState(), doc.id);
    state = applyRankResponse(state, hits(["b", "d"]), paragraphIdsOf(doc));
    const seen = new Set<string>();
    for (let i = 0; i < 6; i++) {
      state = navigateHighlights(state, 1);
      seen.add(state.currentHighlight!);
    }
    expect(seen).toEqual(new Set(["b", "d"]));
  });
});

describe("answers", () => {
  const answer: AnswerOut = {
    text: "The sensor was a thermistor.",
    refused: false,
    provider_id: "stub",
    model_id: "stub",
    used_passages: [
      { index: 0, paragraph_id: "a", text: "text a" },
      { index: 1, paragraph_id: "b", text: "text b" },
    ],
  };

  it("always stores an answer with exactly its source-passage links", () => {
    const state = applyAnswer(initialState(), answer);
    expect(state.answer).not.toBeNull();
    expect(state.answer!.links.map((l) => l.paragraphId)).toEqual(["a", "b"]);
    expect(state.answer!.links.map((l) => l.index)).toEqual([0, 1]);
  });

  it("keeps refusals linkless only when no passages were used", () => {
    const refusal: AnswerOut = {
      ...answer,
      text: "I cannot answer that.",
      refused: true,
      used_passages: [],
    };
    const state = applyAnswer(initialState(), refusal);
    expect(state.answer!.refused).toBe(true);
    expect(state.answer!.links).toEqual([]);
  });
});

describe("checklist", () => {
  it("marks a category covered when a paper paragraph is in a matching retrieval's positives", () => {
    const doc = paper(["a", "b"]);
    const spec: RetrievalOut = {
      id: "r1",
      name: "Sensing Relevant",
      description: null,
      category: "sensing",
      positive_queries: [],
      negative_queries: [],
      positive_paragraph_ids: ["b", "unrelated"],
      negative_paragraph_ids: [],
      weights: { a: 1, b: 1, c: 1, d: 1 },
      min_score: null,
    };
    const rows = buildChecklist(doc, [spec]);
    const byCategory = new Map(rows.map((r) => [r.category, r]));
    expect(byCategory.get("sensing")!.covered).toBe(true);
    expect(byCategory.get("sensing")!.paragraphIds).toEqual(["b"]);
    expect(byCategory.get("data")!.covered).toBe(false);
    expect(rows).toHaveLength(4);
  });
});
