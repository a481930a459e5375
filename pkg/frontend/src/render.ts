/**
 * DOM rendering. These functions consume view models and handlers; they
 * make no decisions of their own beyond layout.
 */

import type { HighlightView } from "./highlights.js";
import { badgeText } from "./highlights.js";
import type { AnswerView } from "./state.js";
import type {
  ChecklistRow,
} from "./checklist.js";
import type {
  LibraryOut,
  PaperOut,
  PaperSummary,
  RankedHitOut,
  RetrievalOut,
  TextHitOut,
} from "./types.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderLibraryList(
  container: HTMLElement,
  libraries: LibraryOut[],
  selected: string | null,
  onSelect: (id: string) => void,
): void {
  container.replaceChildren();
  for (const library of libraries) {
    const item = el("button", "library-item" + (library.id === selected ? " selected" : ""));
    item.append(
      el("span", "library-name", library.name),
      el("span", "library-count", `${library.paper_count}`),
    );
    item.addEventListener("click", () => onSelect(library.id));
    container.append(item);
  }
}

export function renderPaperList(
  container: HTMLElement,
  papers: PaperSummary[],
  selected: string | null,
  onSelect: (id: string) => void,
): void {
  container.replaceChildren();
  const table = el("table", "paper-table");
  const head = el("tr");
  for (const column of ["Title", "Authors", "Date"]) head.append(el("th", "", column));
  table.append(head);
  for (const paper of papers) {
    const row = el("tr", "paper-row" + (paper.id === selected ? " selected" : ""));
    const title = el("td", "paper-title", paper.title || "(untitled)");
    if (paper.needs_review) title.append(el("span", "review-flag", " needs review"));
    row.append(
      title,
      el("td", "", paper.authors.join(", ")),
      el("td", "", paper.date ?? ""),
    );
    row.addEventListener("click", () => onSelect(paper.id));
    table.append(row);
  }
  container.append(table);
}

export interface DocumentHandlers {
  onLabel: (paragraphId: string, polarity: "positive" | "negative") => void;
  onCorrect: (paragraphId: string, currentText: string) => void;
}

/**
 * Parsed-text pane: sections and paragraphs, with ranked paragraphs
 * tinted by their highlight color and badged "NN.N% — + -".
 */
export function renderDocument(
  container: HTMLElement,
  paper: PaperOut,
  highlights: HighlightView[],
  currentHighlight: string | null,
  handlers: DocumentHandlers,
): void {
  container.replaceChildren();
  const byId = new Map(highlights.map((h) => [h.paragraphId, h]));
  const header = el("div", "paper-header");
  header.append(el("h2", "", paper.metadata.title));
  header.append(el("div", "paper-authors", paper.metadata.authors.join(" · ")));
  if (paper.metadata.date) header.append(el("div", "paper-date", paper.metadata.date));
  if (paper.original_uri) {
    const link = el("a", "original-link", "open original");
    link.setAttribute("href", paper.original_uri);
    link.setAttribute("target", "_blank");
    header.append(link);
  }
  container.append(header);

  for (const section of paper.sections) {
    if (section.heading) container.append(el("h3", "section-heading", section.heading));
    for (const paragraph of section.paragraphs) {
      const view = byId.get(paragraph.id);
      const block = el("div", "paragraph" + (view ? " highlighted" : ""));
      block.id = `paragraph-${paragraph.id}`;
      if (view) {
        block.style.backgroundColor = view.color;
        if (paragraph.id === currentHighlight) block.classList.add("current");
        const badge = el("span", "score-badge", badgeText(view));
        const plus = el("button", "label-button plus", "+");
        plus.addEventListener("click", () => handlers.onLabel(paragraph.id, "positive"));
        const minus = el("button", "label-button minus", "−");
        minus.addEventListener("click", () => handlers.onLabel(paragraph.id, "negative"));
        if (view.pendingLabel) {
          badge.classList.add(`pending-${view.pendingLabel}`);
        }
        badge.append(plus, minus);
        block.append(badge);
      }
      const body = el("p", "paragraph-text", paragraph.text);
      if (paragraph.edited) body.classList.add("edited");
      if (paragraph.duplicate) block.append(el("span", "duplicate-flag", "duplicate"));
      body.addEventListener("dblclick", () =>
        handlers.onCorrect(paragraph.id, paragraph.text),
      );
      block.append(body);
      container.append(block);
    }
  }
}

export function renderTextHits(
  container: HTMLElement,
  hits: TextHitOut[],
  onJump: (paragraphId: string) => void,
): void {
  container.replaceChildren();
  if (hits.length === 0) {
    container.append(el("div", "empty", "no matches"));
    return;
  }
  for (const hit of hits) {
    const row = el("div", "text-hit");
    row.append(el("span", "hit-count", `${hit.spans.length}×`));
    const excerpt = el("a", "hit-excerpt", hit.paragraph.text.slice(0, 160));
    excerpt.setAttribute("href", `#paragraph-${hit.paragraph.id}`);
    excerpt.addEventListener("click", () => onJump(hit.paragraph.id));
    row.append(excerpt);
    container.append(row);
  }
}

export function renderRankedHits(
  container: HTMLElement,
  hits: RankedHitOut[],
  onJump: (paragraphId: string) => void,
): void {
  container.replaceChildren();
  for (const hit of hits) {
    const row = el("div", "ranked-hit");
    row.append(el("span", "hit-rank", `${hit.rank}`));
    row.append(el("span", "hit-score", hit.display_score));
    const excerpt = el("a", "hit-excerpt", hit.text.slice(0, 160));
    excerpt.setAttribute("href", `#paragraph-${hit.paragraph_id}`);
    excerpt.addEventListener("click", () => onJump(hit.paragraph_id));
    row.append(excerpt);
    container.append(row);
  }
}

export interface RetrievalEditorHandlers {
  onSave: (update: {
    name: string;
    description: string | null;
    positive_queries: string[];
    negative_queries: string[];
  }) => void;
  onRank: () => void;
}

/**
 * Create/edit form for a retrieval: name, description, and the two query
 * lists with a delete button per row and an append field per list.
 */
export function renderRetrievalEditor(
  container: HTMLElement,
  spec: RetrievalOut,
  handlers: RetrievalEditorHandlers,
): void {
  container.replaceChildren();
  const working = {
    positive: [...spec.positive_queries],
    negative: [...spec.negative_queries],
  };

  const nameInput = el("input", "retrieval-name") as HTMLInputElement;
  nameInput.value = spec.name;
  const descriptionInput = el("input", "retrieval-description") as HTMLInputElement;
  descriptionInput.value = spec.description ?? "";
  descriptionInput.placeholder = "Retrieval Description (Optional)";

  container.append(el("h3", "", "Retrieval Information"));
  container.append(nameInput, descriptionInput);
  if (spec.category) container.append(el("div", "retrieval-category", `category: ${spec.category}`));

  const save = () =>
    handlers.onSave({
      name: nameInput.value,
      description: descriptionInput.value || null,
      positive_queries: working.positive,
      negative_queries: working.negative,
    });

  const renderQueryList = (kind: "positive" | "negative") => {
    const wrapper = el("div", `query-list ${kind}`);
    wrapper.append(el("h4", "", kind === "positive" ? "Positive Queries" : "Negative Queries"));
    const list = el("ul");
    working[kind].forEach((query, index) => {
      const item = el("li", "query-row");
      item.append(el("span", "query-text", query));
      const remove = el("button", "query-delete", "Delete");
      remove.addEventListener("click", () => {
        working[kind].splice(index, 1);
        save();
      });
      item.append(remove);
      list.append(item);
    });
    const addInput = el("input", "query-add") as HTMLInputElement;
    addInput.placeholder = "add a query and press Enter";
    addInput.addEventListener("keydown", (event) => {
      if (event.key === "Enter" && addInput.value.trim()) {
        working[kind].push(addInput.value.trim());
        save();
      }
    });
    wrapper.append(list, addInput);
    return wrapper;
  };

  container.append(renderQueryList("positive"), renderQueryList("negative"));

  const membership = el("div", "memberships");
  membership.append(
    el("div", "", `positive paragraphs: ${spec.positive_paragraph_ids.length}`),
    el("div", "", `negative paragraphs: ${spec.negative_paragraph_ids.length}`),
  );
  container.append(membership);

  const rankButton = el("button", "rank-button", "Rank");
  rankButton.addEventListener("click", handlers.onRank);
  container.append(rankButton);
}

/**
 * Answer pane. Every answer renders with its source-passage links: one
 * clickable cross-reference per passage that was sent to the model.
 */
export function renderAnswer(
  container: HTMLElement,
  answer: AnswerView,
  onJump: (paragraphId: string) => void,
): void {
  container.replaceChildren();
  const text = el("div", "answer-text" + (answer.refused ? " refused" : ""), answer.text);
  container.append(text);
  const list = el("ol", "answer-sources");
  for (const link of answer.links) {
    const item = el("li");
    const anchor = el("a", "source-link", link.text.slice(0, 120));
    anchor.setAttribute("href", `#paragraph-${link.paragraphId}`);
    anchor.setAttribute("data-paragraph-id", link.paragraphId);
    anchor.addEventListener("click", () => onJump(link.paragraphId));
    item.append(anchor);
    list.append(item);
  }
  container.append(el("h4", "", "source passages"), list);
}

export function renderChecklist(container: HTMLElement, rows: ChecklistRow[]): void {
  container.replaceChildren();
  const list = el("ul", "checklist");
  for (const row of rows) {
    const item = el("li", "checklist-row" + (row.covered ? " covered" : ""));
    item.append(
      el("span", "checklist-mark", row.covered ? "✓" : "○"),
      el("span", "checklist-category", row.category),
      el("span", "checklist-count", row.covered ? `${row.paragraphIds.length} labeled` : "none"),
    );
    list.append(item);
  }
  container.append(list);
}

export function renderStaleNotice(container: HTMLElement, onRefresh: () => void): void {
  const notice = el("div", "stale-notice");
  notice.append(el("span", "", "The document changed; highlights are out of date."));
  const button = el("button", "refresh-button", "Refresh");
  button.addEventListener("click", onRefresh);
  notice.append(button);
  container.prepend(notice);
}
