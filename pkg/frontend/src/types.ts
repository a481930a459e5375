/**
 * Wire types mirroring the service API (see docs/openapi.json in the
 * repository root). The UI holds no business logic: every score, rank,
 * and label decision arrives from the service in these shapes.
 */

export interface LibraryOut {
  id: string;
  name: string;
  created_at: string;
  paper_count: number;
}

export interface PaperSummary {
  id: string;
  title: string;
  authors: string[];
  date: string | null;
  doi: string | null;
  needs_review: boolean;
  paragraph_count: number;
}

export interface ParagraphOut {
  id: string;
  paper_id: string;
  section_index: number;
  para_index: number;
  text: string;
  edited: boolean;
  duplicate: boolean;
}

export interface SectionOut {
  heading: string;
  paragraphs: ParagraphOut[];
}

export interface PaperOut {
  id: string;
  metadata: {
    title: string;
    abstract: string;
    authors: string[];
    date: string | null;
    doi: string | null;
  };
  sections: SectionOut[];
  source_format: string;
  needs_review: boolean;
  original_uri: string | null;
  side_records: { kind: string; text: string }[];
}

export interface RankedHitOut {
  rank: number;
  paragraph_id: string;
  score: number;
  display_score: string;
  text: string;
}

export interface TextHitOut {
  paragraph: ParagraphOut;
  spans: [number, number][];
}

export interface SearchResponse {
  mode: "text" | "semantic";
  hits: TextHitOut[] | RankedHitOut[];
}

export interface WeightsOut {
  a: number;
  b: number;
  c: number;
  d: number;
}

export interface RetrievalOut {
  id: string;
  name: string;
  description: string | null;
  category: string | null;
  positive_queries: string[];
  negative_queries: string[];
  positive_paragraph_ids: string[];
  negative_paragraph_ids: string[];
  weights: WeightsOut;
  min_score: number | null;
}

export interface PassageOut {
  index: number;
  paragraph_id: string;
  text: string;
}

export interface AnswerOut {
  text: string;
  used_passages: PassageOut[];
  refused: boolean;
  provider_id: string;
  model_id: string;
}

export interface EmbeddingOut {
  provider_id: string;
  model_id: string;
  dim: number;
  values: number[];
  norm: number;
}

export type Polarity = "positive" | "negative" | "clear";

export type Category = "data" | "sensing" | "model" | "system";

export const CATEGORIES: Category[] = ["data", "sensing", "model", "system"];
