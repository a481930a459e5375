// @vitest-environment jsdom
import { describe, expect, it } from "vitest";

import { buildHighlights } from "../src/highlights.js";
import { renderAnswer, renderDocument, renderRetrievalEditor } from "../src/render.js";
import type { AnswerView } from "../src/state.js";
import type { PaperOut, RankedHitOut, RetrievalOut } from "../src/types.js";

function paper(ids: string[]): PaperOut {
  return {
    id: "paper1",
    metadata: { title: "A paper", abstract: "", authors: ["X"], date: null, doi: null },
    sections: [
      {
        heading: "Methods",
        paragraphs: ids.map((id, i) => ({
          id,
          paper_id: "paper1",
          section_index: 0,
          para_index: i,
          text: `text of ${id}`,
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

const noop = () => undefined;

describe("renderDocument", () => {
  it("tints exactly the ranked paragraphs and wires ± buttons", () => {
    const ids = ["a", "b", "c", "d", "e", "f", "g"];
    const hits: RankedHitOut[] = ids.slice(0, 5).map((id, i) => ({
      rank: i + 1,
      paragraph_id: id,
      score: 0.9 - i * 0.1,
      display_score: `${90 - i * 10}.0%`,
      text: `text of ${id}`,
    }));
    const container = document.createElement("div");
    const labeled: [string, string][] = [];
    renderDocument(container, paper(ids), buildHighlights(hits), "a", {
      onLabel: (pid, polarity) => labeled.push([pid, polarity]),
      onCorrect: noop,
    });

    const highlighted = container.querySelectorAll(".paragraph.highlighted");
    expect(highlighted).toHaveLength(5);
    const badges = container.querySelectorAll(".score-badge");
    expect(badges).toHaveLength(5);
    expect(badges[0].textContent).toContain("90.0%");

    (container.querySelector(".label-button.minus") as HTMLButtonElement).click();
    expect(labeled).toEqual([["a", "negative"]]);

    // hue monotone: inline background colors follow the score order
    const colors = Array.from(highlighted).map(
      (node) => (node as HTMLElement).style.backgroundColor,
    );
    expect(new Set(colors).size).toBe(5);
  });
});

describe("renderAnswer", () => {
  it("renders one clickable link per used passage", () => {
    const answer: AnswerView = {
      text: "An answer.",
      refused: false,
      links: [
        { index: 0, paragraphId: "a", text: "text of a" },
        { index: 1, paragraphId: "b", text: "text of b" },
      ],
    };
    const container = document.createElement("div");
    const jumps: string[] = [];
    renderAnswer(container, answer, (pid) => jumps.push(pid));
    const anchors = container.querySelectorAll("a.source-link");
    expect(anchors).toHaveLength(2);
    expect(Array.from(anchors).map((a) => a.getAttribute("data-paragraph-id"))).toEqual([
      "a",
      "b",
    ]);
    (anchors[1] as HTMLAnchorElement).click();
    expect(jumps).toEqual(["b"]);
  });
});

describe("renderRetrievalEditor", () => {
  const spec: RetrievalOut = {
    id: "r1",
    name: "Sensing Relevant",
    description: null,
    category: "sensing",
    positive_queries: ["q1", "q2"],
    negative_queries: ["n1"],
    positive_paragraph_ids: [],
    negative_paragraph_ids: [],
    weights: { a: 1, b: 1, c: 1, d: 1 },
    min_score: null,
  };

  it("shows each query with a per-row delete that saves the edited list", () => {
    const container = document.createElement("div");
    const saved: unknown[] = [];
    renderRetrievalEditor(container, spec, {
      onSave: (update) => saved.push(update),
      onRank: noop,
    });
    const rows = container.querySelectorAll(".query-row");
    expect(rows).toHaveLength(3);
    (rows[0].querySelector(".query-delete") as HTMLButtonElement).click();
    expect(saved).toHaveLength(1);
    expect(saved[0]).toMatchObject({
      name: "Sensing Relevant",
      positive_queries: ["q2"],
      negative_queries: ["n1"],
    });
  });
});
