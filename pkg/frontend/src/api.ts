/**
 * Typed client for the workbench HTTP API. All state changes flow through
 * here; the UI never touches workspace files or computes rankings itself.
 */

import type {
  AnswerOut,
  EmbeddingOut,
  LibraryOut,
  PaperOut,
  PaperSummary,
  ParagraphOut,
  Polarity,
  RankedHitOut,
  RetrievalOut,
  SearchResponse,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public readonly code: string,
    message: string,
    public readonly status: number,
  ) {
    super(message);
  }
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly token: string | null = null,
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = {};
    if (body !== undefined) headers["Content-Type"] = "application/json";
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    const resp = await fetch(this.baseUrl + path, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const text = await resp.text();
    if (!resp.ok) {
      try {
        const envelope = JSON.parse(text);
        throw new ApiError(envelope.error.code, envelope.error.message, resp.status);
      } catch (err) {
        if (err instanceof ApiError) throw err;
        throw new ApiError("http_error", `${resp.status}: ${text}`, resp.status);
      }
    }
    return (text ? JSON.parse(text) : undefined) as T;
  }

  listLibraries(): Promise<LibraryOut[]> {
    return this.request("GET", "/libraries");
  }

  createLibrary(name: string): Promise<LibraryOut> {
    return this.request("POST", "/libraries", { name });
  }

  listPapers(libraryId: string): Promise<PaperSummary[]> {
    return this.request("GET", `/libraries/${libraryId}/papers`);
  }

  getPaper(paperId: string): Promise<PaperOut> {
    return this.request("GET", `/papers/${paperId}`);
  }

  uploadTei(libraryId: string, content: string, originalUri?: string) {
    return this.request<{ paper: PaperOut; created: boolean }>(
      "POST",
      `/libraries/${libraryId}/papers`,
      { format: "tei", content, original_uri: originalUri ?? null },
    );
  }

  uploadText(libraryId: string, title: string, text: string) {
    return this.request<{ paper: PaperOut; created: boolean }>(
      "POST",
      `/libraries/${libraryId}/papers`,
      { format: "text", title, text },
    );
  }

  correctParagraph(paragraphId: string, text: string): Promise<ParagraphOut> {
    return this.request("PATCH", `/paragraphs/${paragraphId}`, { text });
  }

  setParagraphLabels(paragraphId: string, categories: string[], irrelevant = false) {
    return this.request<{ paragraph_id: string; categories: string[]; irrelevant: boolean }>(
      "PUT",
      `/paragraphs/${paragraphId}/labels`,
      { categories, irrelevant },
    );
  }

  searchPaper(
    paperId: string,
    query: string,
    mode: "text" | "semantic",
    k = 5,
  ): Promise<SearchResponse> {
    const params = new URLSearchParams({ q: query, mode, k: String(k) });
    return this.request("GET", `/papers/${paperId}/search?${params}`);
  }

  listRetrievals(): Promise<RetrievalOut[]> {
    return this.request("GET", "/retrievals");
  }

  getRetrieval(specId: string): Promise<RetrievalOut> {
    return this.request("GET", `/retrievals/${specId}`);
  }

  createRetrieval(body: {
    name: string;
    description?: string | null;
    category?: string | null;
    positive_queries?: string[];
    negative_queries?: string[];
  }): Promise<RetrievalOut> {
    return this.request("POST", "/retrievals", body);
  }

  updateRetrieval(
    specId: string,
    body: Partial<Pick<RetrievalOut,
      "name" | "description" | "category" | "positive_queries" | "negative_queries"
    >>,
  ): Promise<RetrievalOut> {
    return this.request("PATCH", `/retrievals/${specId}`, body);
  }

  importDefaultRetrievals(): Promise<RetrievalOut[]> {
    return this.request("POST", "/retrievals/import-defaults");
  }

  labelParagraph(specId: string, paragraphId: string, polarity: Polarity) {
    return this.request<RetrievalOut>("POST", `/retrievals/${specId}/labels`, {
      paragraph_id: paragraphId,
      polarity,
    });
  }

  rank(specId: string, scope: string, k = 5): Promise<RankedHitOut[]> {
    const params = new URLSearchParams({ scope, k: String(k) });
    return this.request("GET", `/retrievals/${specId}/rank?${params}`);
  }

  retrievalEmbedding(specId: string): Promise<EmbeddingOut> {
    return this.request("GET", `/retrievals/${specId}/embedding`);
  }

  query(body: { query: string; source: string; scope: string; k?: number }): Promise<AnswerOut> {
    return this.request("POST", "/query", body);
  }

  health(): Promise<{ status: string }> {
    return this.request("GET", "/health");
  }
}
