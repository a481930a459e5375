/**
 * Application wiring: fetch through ApiClient, fold into ViewState, hand
 * view models to the renderers. Business logic (scores, ranking, label
 * effects) lives entirely on the service side.
 */

import { ApiClient } from "./api.js";
import { buildChecklist } from "./checklist.js";
import {
  renderAnswer,
  renderChecklist,
  renderDocument,
  renderLibraryList,
  renderPaperList,
  renderRankedHits,
  renderRetrievalEditor,
  renderStaleNotice,
  renderTextHits,
} from "./render.js";
import {
  applyAnswer,
  applyOptimisticLabel,
  applyRankResponse,
  initialState,
  navigateHighlights,
  paragraphIdsOf,
  selectPaper,
  selectRetrieval,
  selectTab,
  type Tab,
  type ViewState,
} from "./state.js";
import type { PaperOut, RankedHitOut, RetrievalOut } from "./types.js";

const TABS: Tab[] = ["text-search", "semantic-search", "query", "retrieval", "checklist"];

const api = new ApiClient(
  (window as unknown as { PARASCOPE_API?: string }).PARASCOPE_API ?? "",
);

let state: ViewState = initialState();
let paper: PaperOut | null = null;
let retrievals: RetrievalOut[] = [];

function byId(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node;
}

function jumpTo(paragraphId: string): void {
  document
    .getElementById(`paragraph-${paragraphId}`)
    ?.scrollIntoView({ behavior: "smooth", block: "center" });
}

async function refreshLibraries(): Promise<void> {
  const libraries = await api.listLibraries();
  renderLibraryList(byId("library-list"), libraries, state.libraryId, (id) => {
    state = { ...state, libraryId: id };
    void refreshPapers();
    void refreshLibraries();
  });
}

async function refreshPapers(): Promise<void> {
  if (!state.libraryId) return;
  const papers = await api.listPapers(state.libraryId);
  renderPaperList(byId("paper-list"), papers, state.paperId, (id) => {
    state = selectPaper(state, id);
    void loadPaper();
    void refreshPapers();
  });
}

async function loadPaper(): Promise<void> {
  if (!state.paperId) return;
  paper = await api.getPaper(state.paperId);
  renderAll();
}

function activeScope(): string | null {
  return state.paperId ? `paper:${state.paperId}` : null;
}

async function rerank(): Promise<void> {
  const scope = activeScope();
  if (!state.retrievalId || !scope || !paper) return;
  const hits = await api.rank(state.retrievalId, scope, 5);
  state = applyRankResponse(state, hits, paragraphIdsOf(paper));
  renderAll();
}

async function onLabel(paragraphId: string, polarity: "positive" | "negative"): Promise<void> {
  const retrievalId = state.retrievalId;
  if (!retrievalId) return;
  state = applyOptimisticLabel(state, paragraphId, polarity);
  renderAll();
  await api.labelParagraph(retrievalId, paragraphId, polarity);
  await rerank(); // reconcile the optimistic badge with fresh scores
  retrievals = await api.listRetrievals();
}

async function onCorrect(paragraphId: string, currentText: string): Promise<void> {
  const replacement = window.prompt("Correct paragraph text:", currentText);
  if (!replacement || replacement === currentText) return;
  await api.correctParagraph(paragraphId, replacement);
  await loadPaper(); // ids change on correction; highlights go stale
}

function renderAll(): void {
  const doc = byId("document-pane");
  if (paper) {
    renderDocument(doc, paper, state.highlights, state.currentHighlight, {
      onLabel: (pid, polarity) => void onLabel(pid, polarity),
      onCorrect: (pid, text) => void onCorrect(pid, text),
    });
    if (state.stale) {
      renderStaleNotice(doc, () => void rerank());
    }
  } else {
    doc.replaceChildren();
  }

  for (const tab of TABS) {
    byId(`tab-${tab}`).classList.toggle("active", tab === state.tab);
    byId(`panel-${tab}`).classList.toggle("hidden", tab !== state.tab);
  }

  if (state.answer) {
    renderAnswer(byId("answer-pane"), state.answer, jumpTo);
  } else {
    byId("answer-pane").replaceChildren();
  }

  if (paper && state.tab === "checklist") {
    renderChecklist(byId("panel-checklist"), buildChecklist(paper, retrievals));
  }

  const active = retrievals.find((r) => r.id === state.retrievalId);
  if (active && state.tab === "retrieval") {
    renderRetrievalEditor(byId("retrieval-editor"), active, {
      onSave: (update) => {
        void api.updateRetrieval(active.id, update).then(async () => {
          retrievals = await api.listRetrievals();
          renderAll();
        });
      },
      onRank: () => void rerank(),
    });
  }
}

async function refreshRetrievals(): Promise<void> {
  retrievals = await api.listRetrievals();
  const select = byId("retrieval-select") as HTMLSelectElement;
  select.replaceChildren();
  for (const spec of retrievals) {
    const option = document.createElement("option");
    option.value = spec.id;
    option.textContent = spec.category ? `${spec.name} (${spec.category})` : spec.name;
    select.append(option);
  }
  if (retrievals.length && !state.retrievalId) {
    state = selectRetrieval(state, retrievals[0].id);
  }
  if (state.retrievalId) select.value = state.retrievalId;
}

function wireControls(): void {
  for (const tab of TABS) {
    byId(`tab-${tab}`).addEventListener("click", () => {
      state = selectTab(state, tab);
      renderAll();
    });
  }

  byId("text-search-run").addEventListener("click", () => {
    const query = (byId("text-search-input") as HTMLInputElement).value;
    if (!state.paperId || !query) return;
    void api.searchPaper(state.paperId, query, "text").then((resp) => {
      renderTextHits(byId("text-search-results"), resp.hits as never, jumpTo);
    });
  });

  byId("semantic-search-run").addEventListener("click", () => {
    const query = (byId("semantic-search-input") as HTMLInputElement).value;
    if (!state.paperId || !query || !paper) return;
    void api.searchPaper(state.paperId, query, "semantic", 5).then((resp) => {
      const hits = resp.hits as RankedHitOut[];
      renderRankedHits(byId("semantic-search-results"), hits, jumpTo);
      state = applyRankResponse(state, hits, paragraphIdsOf(paper!));
      renderAll();
    });
  });

  byId("highlight-prev").addEventListener("click", () => {
    state = navigateHighlights(state, -1);
    if (state.currentHighlight) jumpTo(state.currentHighlight);
    renderAll();
  });
  byId("highlight-next").addEventListener("click", () => {
    state = navigateHighlights(state, 1);
    if (state.currentHighlight) jumpTo(state.currentHighlight);
    renderAll();
  });

  (byId("retrieval-select") as HTMLSelectElement).addEventListener("change", (event) => {
    state = selectRetrieval(state, (event.target as HTMLSelectElement).value);
    renderAll();
  });

  byId("retrieval-rank").addEventListener("click", () => void rerank());
  byId("retrieval-import").addEventListener("click", () => {
    void api.importDefaultRetrievals().then(() => refreshRetrievals());
  });

  byId("query-run").addEventListener("click", () => {
    const question = (byId("query-input") as HTMLInputElement).value;
    const scope = activeScope();
    if (!question || !scope) return;
    const source = state.retrievalId && (byId("query-use-retrieval") as HTMLInputElement).checked
      ? `retrieval:${state.retrievalId}`
      : "semantic";
    void api.query({ query: question, source, scope, k: 5 }).then((answer) => {
      state = applyAnswer(state, answer);
      renderAll();
    });
  });
}

async function boot(): Promise<void> {
  wireControls();
  await refreshLibraries();
  await refreshRetrievals();
  renderAll();
}

void boot();
