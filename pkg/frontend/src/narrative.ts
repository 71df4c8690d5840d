/**
 * Narrative explanation panel: served paragraphs with group color
 * chips, hover-to-filter map linking, identifier editing, and the
 * keyphrase / original-paragraph lists for cluster paragraphs.
 */

import type {
  ApiClient,
  KeyphrasesResponse,
  NarrativeDocJson,
  ParagraphJson,
  ParagraphsResponse,
} from "./api.js";
import type { ViewEvent } from "./viewstate.js";
import { GROUP_COLORS, paragraphGroup } from "./colors.js";
import { fmt } from "./format.js";

export class NarrativePanel {
  readonly root: HTMLElement;
  private keyphraseEl: HTMLElement;
  private paragraphEl: HTMLElement;
  private doc: NarrativeDocJson | null = null;
  private docKey = "";

  constructor(
    container: HTMLElement,
    private client: ApiClient,
    private dispatch: (event: ViewEvent) => void,
  ) {
    this.root = document.createElement("div");
    this.root.className = "narrative-panel";
    this.keyphraseEl = document.createElement("div");
    this.keyphraseEl.className = "keyphrase-list";
    this.paragraphEl = document.createElement("div");
    this.paragraphEl.className = "paragraph-list";
    container.append(this.root, this.keyphraseEl, this.paragraphEl);
  }

  /** Anchor set of one paragraph, by id, from the last-rendered doc. */
  anchorsOf(paragraphId: string): string[] {
    const para = this.doc?.paragraphs.find(
      (p) => p.paragraph_id === paragraphId,
    );
    return para ? [...para.anchors] : [];
  }

  paragraphIds(): string[] {
    return this.doc?.paragraphs.map((p) => p.paragraph_id) ?? [];
  }

  render(doc: NarrativeDocJson, docKey: string): void {
    this.doc = doc;
    this.docKey = docKey;
    this.root.replaceChildren();
    for (const para of doc.paragraphs) {
      this.root.appendChild(this.renderParagraph(para));
    }
  }

  private renderParagraph(para: ParagraphJson): HTMLElement {
    const block = document.createElement("div");
    block.className = `narrative-paragraph role-${para.role}`;
    block.dataset.paragraphId = para.paragraph_id;
    const group = paragraphGroup(para.paragraph_id);
    if (group) {
      const chip = document.createElement("span");
      chip.className = "group-chip";
      chip.dataset.group = group;
      chip.style.background = GROUP_COLORS[group] ?? "";
      block.appendChild(chip);
    }
    const text = document.createElement("p");
    text.textContent = para.text;
    block.appendChild(text);

    block.addEventListener("mouseenter", () =>
      this.dispatch({ type: "hover_paragraph", paragraphId: para.paragraph_id }),
    );
    block.addEventListener("mouseleave", () =>
      this.dispatch({ type: "hover_paragraph", paragraphId: null }),
    );

    if (para.keyphrase_regions.length > 0) {
      const btn = document.createElement("button");
      btn.className = "show-keyphrases";
      btn.textContent = "show keyphrases";
      btn.addEventListener("click", () =>
        this.dispatch({ type: "click_paragraph", paragraphId: para.paragraph_id }),
      );
      block.appendChild(btn);
    }

    const identifier = para.identifier ?? para.default_identifier;
    if (identifier !== null) {
      const edit = document.createElement("input");
      edit.className = "identifier-edit";
      edit.value = identifier;
      edit.addEventListener("change", () => {
        void this.client
          .editIdentifier(this.docKey, para.paragraph_id, edit.value)
          .then((doc) => this.render(doc, this.docKey));
      });
      block.appendChild(edit);
    }
    return block;
  }

  renderKeyphrases(response: KeyphrasesResponse): void {
    this.keyphraseEl.replaceChildren();
    const list = document.createElement("ol");
    for (const entry of response.entries) {
      const row = document.createElement("li");
      row.className = "keyphrase";
      row.dataset.phrase = entry.phrase;
      row.textContent = `${entry.phrase} (${fmt(entry.score)})`;
      row.addEventListener("click", () => {
        void this.client
          .paragraphs(entry.phrase, entry.region_ids)
          .then((match) => this.renderParagraphMatches(match));
      });
      list.appendChild(row);
    }
    this.keyphraseEl.appendChild(list);
  }

  renderParagraphMatches(response: ParagraphsResponse): void {
    this.paragraphEl.replaceChildren();
    for (const match of response.matches) {
      const block = document.createElement("blockquote");
      block.className = "source-paragraph";
      block.dataset.regionId = match.region_id;
      // highlight served occurrence offsets inside the source text
      let cursor = 0;
      for (const [start, end] of match.offsets) {
        block.append(match.paragraph.slice(cursor, start));
        const mark = document.createElement("mark");
        mark.textContent = match.paragraph.slice(start, end);
        block.appendChild(mark);
        cursor = end;
      }
      block.append(match.paragraph.slice(cursor));
      this.paragraphEl.appendChild(block);
    }
  }
}
