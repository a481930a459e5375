/**
 * Checklist tab: a per-paper completion view over the four information
 * categories. A category counts as covered once at least one paragraph of
 * the paper sits in the positive ensemble of a retrieval carrying that
 * category.
 */

import { CATEGORIES, type Category, type PaperOut, type RetrievalOut } from "./types.js";

export interface ChecklistRow {
  category: Category;
  covered: boolean;
  paragraphIds: string[];
}

export function buildChecklist(paper: PaperOut, retrievals: RetrievalOut[]): ChecklistRow[] {
  const paperIds = new Set<string>();
  for (const section of paper.sections) {
    for (const paragraph of section.paragraphs) paperIds.add(paragraph.id);
  }
  return CATEGORIES.map((category) => {
    const ids: string[] = [];
    for (const spec of retrievals) {
      if (spec.category !== category) continue;
      for (const pid of spec.positive_paragraph_ids) {
        if (paperIds.has(pid)) ids.push(pid);
      }
    }
    return { category, covered: ids.length > 0, paragraphIds: ids };
  });
}
