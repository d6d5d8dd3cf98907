// Single-page UI over the report service. One App instance per tab; all
// state transitions round-trip through the HTTP API, so reloading the
// page (or re-fetching the session) reconstructs the same view.

import { Api, ApiError } from "./api.js";
import { DEFAULT_POLL, pollUntil, type PollOptions } from "./backoff.js";
import { linkFor, renderSectionHtml } from "./citations.js";
import { clear, el } from "./dom.js";
import {
  addChild,
  deleteNode,
  leafIds,
  moveNode,
  renameNode,
  toTocText,
} from "./outlineEdit.js";
import type {
  FuzzyMatch,
  OutlineNodeView,
  SessionView,
} from "./types.js";

export interface AppOptions {
  baseUrl?: string;
  fetchImpl?: (input: string, init?: RequestInit) => Promise<Response>;
  poll?: Partial<PollOptions>;
  debounceMs?: number;
}

interface Download {
  filename: string;
  content: string;
}

export class App {
  readonly api: Api;
  session: SessionView | null = null;
  fuzzyMatches: FuzzyMatch[] = [];
  statusMessage = "";
  errorMessage = "";
  lastDownload: Download | null = null;
  selectedNodeId: string | null = null;
  renamingNodeId: string | null = null;

  private readonly doc: Document;
  private readonly poll: PollOptions;
  private readonly debounceMs: number;
  private pending = 0;
  private idleWaiters: (() => void)[] = [];
  private fuzzyTimer: ReturnType<typeof setTimeout> | null = null;
  private fuzzyRelease: (() => void) | null = null;
  private dragHitIndex: number | null = null;
  private dragNodeId: string | null = null;

  constructor(
    private readonly root: HTMLElement,
    options: AppOptions = {},
  ) {
    this.doc = root.ownerDocument;
    this.api = new Api(options.baseUrl ?? "", options.fetchImpl);
    this.poll = { ...DEFAULT_POLL, ...(options.poll ?? {}) };
    this.debounceMs = options.debounceMs ?? 250;
    this.render();
  }

  // --- idle tracking (lets tests await quiescence) ---

  whenIdle(): Promise<void> {
    if (this.pending === 0) return Promise.resolve();
    return new Promise((resolve) => this.idleWaiters.push(resolve));
  }

  private track<T>(work: Promise<T>): Promise<T> {
    this.pending += 1;
    return work.finally(() => {
      this.pending -= 1;
      if (this.pending === 0) {
        this.idleWaiters.splice(0).forEach((resolve) => resolve());
      }
    });
  }

  private action(label: string, work: () => Promise<void>): Promise<void> {
    this.statusMessage = label;
    this.errorMessage = "";
    this.render();
    return this.track(
      work()
        .catch((error: unknown) => {
          this.errorMessage =
            error instanceof ApiError
              ? `${error.message} (HTTP ${error.status})`
              : String(error instanceof Error ? error.message : error);
        })
        .finally(() => {
          this.statusMessage = "";
          this.render();
        }),
    );
  }

  // --- stage actions ---

  submitQuery(query: string, k: number, threshold: number, lambda: number, mode: "mmr" | "relevance"): Promise<void> {
    return this.action("retrieving…", async () => {
      this.session = await this.api.createSession(query, {
        k,
        sim_threshold: threshold,
        lambda,
        mode,
      });
      this.fuzzyMatches = [];
      this.selectedNodeId = null;
    });
  }

  reloadSession(): Promise<void> {
    const id = this.session?.session_id;
    if (!id) return Promise.resolve();
    return this.action("refreshing…", async () => {
      this.session = await this.api.getSession(id);
    });
  }

  removeHit(judgmentId: string, number: number): Promise<void> {
    const id = this.requireSession();
    return this.action("removing passage…", async () => {
      this.session = await this.api.removeHit(id, judgmentId, number);
    });
  }

  addHit(judgmentId: string, number: number): Promise<void> {
    const id = this.requireSession();
    return this.action("adding passage…", async () => {
      this.session = await this.api.addHit(id, judgmentId, number);
      this.fuzzyMatches = [];
    });
  }

  /** Optimistic flat reorder: move the hit at `from` before position `to`. */
  reorderHit(from: number, to: number): Promise<void> {
    const id = this.requireSession();
    const session = this.session!;
    const hits = [...session.hits];
    if (from < 0 || from >= hits.length) return Promise.resolve();
    const [moved] = hits.splice(from, 1);
    const clamped = Math.max(0, Math.min(to, hits.length));
    hits.splice(clamped, 0, moved);
    // optimistic: render the new order immediately, then reconcile
    session.hits = hits.map((h, rank) => ({ ...h, rank }));
    this.render();
    return this.action("saving order…", async () => {
      this.session = await this.api.reorderHits(
        id,
        hits.map((h) => [h.judgment_id, h.number]),
      );
    });
  }

  fuzzyInput(query: string): void {
    if (this.fuzzyTimer !== null) {
      clearTimeout(this.fuzzyTimer);
      this.fuzzyTimer = null;
      this.fuzzyRelease?.();
      this.fuzzyRelease = null;
    }
    if (!query.trim()) {
      this.fuzzyMatches = [];
      this.render();
      return;
    }
    void this.track(
      new Promise<void>((resolve) => {
        this.fuzzyRelease = resolve;
        this.fuzzyTimer = setTimeout(() => {
          this.fuzzyTimer = null;
          this.fuzzyRelease = null;
          this.api
            .corpusSearch(query)
            .then((data) => {
              this.fuzzyMatches = data.matches;
            })
            .catch((error: unknown) => {
              this.errorMessage = String(error instanceof Error ? error.message : error);
            })
            .finally(() => {
              this.render();
              resolve();
            });
        }, this.debounceMs);
      }),
    );
  }

  regenerateStructure(): Promise<void> {
    const id = this.requireSession();
    return this.action("clustering and organizing…", async () => {
      await this.api.startOutline(id);
      await pollUntil(
        () => this.api.pollOutline(id),
        (data) => data.status === "done",
        this.poll,
      );
      this.session = await this.api.getSession(id);
      this.selectedNodeId = null;
    });
  }

  private putRoots(roots: OutlineNodeView[]): Promise<void> {
    const id = this.requireSession();
    return this.action("saving outline…", async () => {
      this.session = await this.api.putOutline(id, toTocText(roots));
      this.renamingNodeId = null;
    });
  }

  renameOutlineNode(nodeId: string, title: string): Promise<void> {
    const roots = this.session?.outline?.roots ?? [];
    const next = renameNode(roots, nodeId, title);
    if (!next) {
      this.errorMessage = "rename needs a non-empty single-line title";
      this.render();
      return Promise.resolve();
    }
    return this.putRoots(next);
  }

  addOutlineNode(parentId: string | null, title: string): Promise<void> {
    const roots = this.session?.outline?.roots ?? [];
    const next = addChild(roots, parentId, title);
    if (!next) {
      this.errorMessage = "new sections need a non-empty single-line title";
      this.render();
      return Promise.resolve();
    }
    return this.putRoots(next);
  }

  deleteOutlineNode(nodeId: string): Promise<void> {
    const roots = this.session?.outline?.roots ?? [];
    const next = deleteNode(roots, nodeId);
    if (!next) {
      this.errorMessage = "cannot delete the last remaining section";
      this.render();
      return Promise.resolve();
    }
    return this.putRoots(next);
  }

  moveOutlineNode(nodeId: string, newParentId: string | null, index: number): Promise<void> {
    const roots = this.session?.outline?.roots ?? [];
    const next = moveNode(roots, nodeId, newParentId, index);
    if (!next) {
      this.errorMessage = "illegal move: a section cannot move into its own subsection";
      this.render();
      return Promise.resolve();
    }
    return this.putRoots(next);
  }

  generateOne(nodeId: string): Promise<void> {
    const id = this.requireSession();
    return this.action("generating section…", async () => {
      await this.api.generateSection(id, nodeId);
      await this.waitForGeneration(id);
    });
  }

  generateAllSections(): Promise<void> {
    const id = this.requireSession();
    return this.action("generating all sections…", async () => {
      await this.api.generateAll(id);
      await this.waitForGeneration(id);
    });
  }

  private async waitForGeneration(id: string): Promise<void> {
    const final = await pollUntil(
      () => this.api.pollGeneration(id),
      (status) => status.state === "done" || status.state === "failed",
      this.poll,
    );
    this.session = await this.api.getSession(id);
    if (final.state === "failed") {
      throw new Error(final.error ?? "generation failed");
    }
  }

  downloadReport(): Promise<void> {
    const id = this.requireSession();
    return this.action("fetching report…", async () => {
      const content = await this.api.reportHtml(id);
      this.lastDownload = { filename: `report-${id}.html`, content };
      this.triggerBrowserDownload(this.lastDownload);
    });
  }

  private triggerBrowserDownload(download: Download): void {
    try {
      const win = this.doc.defaultView;
      if (!win || typeof win.URL?.createObjectURL !== "function") return;
      const url = win.URL.createObjectURL(new win.Blob([download.content], { type: "text/html" }));
      const anchor = el(this.doc, "a", { href: url, download: download.filename });
      this.doc.body.append(anchor);
      anchor.click();
      anchor.remove();
      win.URL.revokeObjectURL(url);
    } catch {
      // environments without Blob/object URLs still keep lastDownload
    }
  }

  private requireSession(): string {
    if (!this.session) throw new Error("no active session");
    return this.session.session_id;
  }

  // --- rendering ---

  render(): void {
    clear(this.root);
    this.root.append(this.renderStatus(), this.renderQueryPanel());
    if (this.session) {
      this.root.append(
        this.renderResultsPanel(),
        this.renderOutlinePanel(),
        this.renderSectionsPanel(),
        this.renderReportPanel(),
      );
    }
  }

  private renderStatus(): HTMLElement {
    return el(this.doc, "div", { class: "statusbar" }, [
      this.statusMessage
        ? el(this.doc, "span", { class: "busy", role: "status" }, [this.statusMessage])
        : null,
      this.errorMessage
        ? el(this.doc, "span", { class: "error", role: "alert" }, [this.errorMessage])
        : null,
    ]);
  }

  private renderQueryPanel(): HTMLElement {
    const doc = this.doc;
    const queryInput = el(doc, "input", {
      id: "query-input",
      type: "text",
      placeholder: "topical query, e.g. forced medical interventions",
      value: this.session?.query ?? "",
    });
    const kInput = el(doc, "input", { id: "k-input", type: "number", min: "1", max: "500", value: "40" });
    const thresholdInput = el(doc, "input", {
      id: "threshold-input",
      type: "range",
      min: "-1",
      max: "1",
      step: "0.01",
      value: "0.2",
    });
    const thresholdShow = el(doc, "output", { id: "threshold-value" }, ["0.20"]);
    thresholdInput.addEventListener("input", () => {
      thresholdShow.textContent = Number(thresholdInput.value).toFixed(2);
    });
    const lambdaInput = el(doc, "input", {
      id: "lambda-input",
      type: "range",
      min: "0",
      max: "1",
      step: "0.05",
      value: "0.5",
    });
    const modeSelect = el(doc, "select", { id: "mode-select" }, [
      el(doc, "option", { value: "mmr" }, ["diverse (MMR)"]),
      el(doc, "option", { value: "relevance" }, ["pure relevance"]),
    ]);
    const submit = el(
      doc,
      "button",
      {
        id: "submit-query",
        type: "submit",
        disabled: !(this.session?.query ?? "").trim(),
      },
      ["Retrieve"],
    );
    queryInput.addEventListener("input", () => {
      submit.disabled = !queryInput.value.trim();
    });
    const form = el(doc, "form", { id: "query-form", class: "panel" }, [
      el(doc, "h2", {}, ["1. Query"]),
      el(doc, "label", { for: "query-input" }, ["Search query"]),
      queryInput,
      el(doc, "div", { class: "controls" }, [
        el(doc, "label", { for: "k-input" }, ["Passages to retrieve"]),
        kInput,
        el(doc, "label", { for: "threshold-input" }, ["Similarity threshold"]),
        thresholdInput,
        thresholdShow,
        el(doc, "label", { for: "lambda-input" }, ["Diversity ↔ relevance"]),
        lambdaInput,
        el(doc, "label", { for: "mode-select" }, ["Mode"]),
        modeSelect,
      ]),
      submit,
      this.session
        ? el(doc, "p", { class: "echo", id: "params-echo" }, [
            `session ${this.session.session_id}: k=${String(
              (this.session.params as { retrieval?: { k?: number } }).retrieval?.k ?? "",
            )} threshold=${String(
              (this.session.params as { retrieval?: { sim_threshold?: number } }).retrieval?.sim_threshold ?? "",
            )} mode=${String(this.session.pipeline_mode.retrieval_mode ?? "")}`,
          ])
        : null,
    ]);
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      if (!queryInput.value.trim()) return;
      void this.submitQuery(
        queryInput.value,
        Number(kInput.value) || 40,
        Number(thresholdInput.value),
        Number(lambdaInput.value),
        (modeSelect.value as "mmr" | "relevance") || "mmr",
      );
    });
    return form;
  }

  private renderResultsPanel(): HTMLElement {
    const doc = this.doc;
    const session = this.session!;
    const indexByRef = new Map(session.hits.map((h, i) => [`${h.judgment_id}#${h.number}`, i]));

    const judgmentCards = session.judgments.map((group) => {
      const rows = group.paragraphs.map((p) => {
        const key = `${group.judgment_id}#${p.number}`;
        const flatIndex = indexByRef.get(key) ?? 0;
        const row = el(doc, "li", { class: "hit-row", "data-ref": key, draggable: "true" }, [
          el(doc, "span", { class: "rank" }, [`#${p.rank}`]),
          el(
            doc,
            "a",
            {
              class: "para-link",
              target: "_blank",
              rel: "noopener",
              href: linkFor(session.link_template, group.judgment_id, p.number),
            },
            [`§ ${p.number}`],
          ),
          el(doc, "span", { class: "sim" }, [p.similarity.toFixed(3)]),
          el(doc, "button", {
            class: "up",
            type: "button",
            title: "move up",
            onclick: () => void this.reorderHit(flatIndex, flatIndex - 1),
          }, ["↑"]),
          el(doc, "button", {
            class: "down",
            type: "button",
            title: "move down",
            onclick: () => void this.reorderHit(flatIndex, flatIndex + 1),
          }, ["↓"]),
          el(doc, "button", {
            class: "remove",
            type: "button",
            title: "remove passage",
            onclick: () => void this.removeHit(group.judgment_id, p.number),
          }, ["✕"]),
        ]);
        row.addEventListener("dragstart", () => {
          this.dragHitIndex = flatIndex;
        });
        row.addEventListener("dragover", (event) => event.preventDefault());
        row.addEventListener("drop", (event) => {
          event.preventDefault();
          if (this.dragHitIndex !== null && this.dragHitIndex !== flatIndex) {
            void this.reorderHit(this.dragHitIndex, flatIndex);
          }
          this.dragHitIndex = null;
        });
        return row;
      });
      return el(doc, "article", { class: "judgment-card" }, [
        el(doc, "h3", {}, [`${group.case_name} (${group.judgment_id}, ${group.date})`]),
        el(doc, "ul", { class: "hit-list" }, rows),
      ]);
    });

    const fuzzyInput = el(doc, "input", {
      id: "fuzzy-input",
      type: "text",
      placeholder: "fuzzy search the corpus to add a passage…",
    });
    fuzzyInput.addEventListener("input", () => this.fuzzyInput(fuzzyInput.value));
    const dropdown = el(
      doc,
      "ul",
      { id: "fuzzy-dropdown", class: this.fuzzyMatches.length ? "open" : "closed" },
      this.fuzzyMatches.map((match) =>
        el(doc, "li", { class: "fuzzy-match" }, [
          el(doc, "button", {
            class: "add-match",
            type: "button",
            "data-ref": `${match.judgment_id}#${match.number}`,
            onclick: () => void this.addHit(match.judgment_id, match.number),
          }, [`+ ${match.case_name} § ${match.number} — ${match.snippet.slice(0, 60)}`]),
        ]),
      ),
    );

    return el(doc, "section", { class: "panel", id: "results-panel" }, [
      el(doc, "h2", {}, [`2. Retrieved passages (${session.hits.length})`]),
      el(doc, "div", { class: "fuzzy-add" }, [fuzzyInput, dropdown]),
      ...judgmentCards,
    ]);
  }

  private renderOutlineNode(node: OutlineNodeView, parent: OutlineNodeView | null, index: number, siblings: OutlineNodeView[]): HTMLElement {
    const doc = this.doc;
    const isRenaming = this.renamingNodeId === node.node_id;
    const row = el(doc, "div", {
      class: `node-row${this.selectedNodeId === node.node_id ? " selected" : ""}`,
      "data-node": node.node_id,
      draggable: "true",
    });
    row.addEventListener("dragstart", (event) => {
      this.dragNodeId = node.node_id;
      event.stopPropagation();
    });
    row.addEventListener("dragover", (event) => event.preventDefault());
    row.addEventListener("drop", (event) => {
      event.preventDefault();
      event.stopPropagation();
      if (this.dragNodeId && this.dragNodeId !== node.node_id) {
        void this.moveOutlineNode(this.dragNodeId, node.node_id, node.children.length);
      }
      this.dragNodeId = null;
    });

    if (isRenaming) {
      const input = el(doc, "input", { class: "rename-input", type: "text", value: node.title });
      row.append(
        input,
        el(doc, "button", {
          class: "rename-save",
          type: "button",
          onclick: () => void this.renameOutlineNode(node.node_id, input.value),
        }, ["save"]),
        el(doc, "button", {
          class: "rename-cancel",
          type: "button",
          onclick: () => {
            this.renamingNodeId = null;
            this.render();
          },
        }, ["cancel"]),
      );
    } else {
      const title = el(doc, "span", { class: "node-title" }, [node.title]);
      title.addEventListener("click", () => {
        this.selectedNodeId = node.node_id;
        this.render();
      });
      row.append(
        title,
        el(doc, "button", {
          class: "rename",
          type: "button",
          title: "rename",
          onclick: () => {
            this.renamingNodeId = node.node_id;
            this.render();
          },
        }, ["rename"]),
        el(doc, "button", {
          class: "add-child",
          type: "button",
          title: "add subsection",
          onclick: () => void this.addOutlineNode(node.node_id, "New subsection"),
        }, ["+sub"]),
        el(doc, "button", {
          class: "delete",
          type: "button",
          title: "delete section",
          onclick: () => void this.deleteOutlineNode(node.node_id),
        }, ["delete"]),
        el(doc, "button", {
          class: "move-up",
          type: "button",
          disabled: index === 0,
          onclick: () => void this.moveOutlineNode(node.node_id, parent?.node_id ?? null, index - 1),
        }, ["↑"]),
        el(doc, "button", {
          class: "move-down",
          type: "button",
          disabled: index >= siblings.length - 1,
          onclick: () => void this.moveOutlineNode(node.node_id, parent?.node_id ?? null, index + 2),
        }, ["↓"]),
      );
    }

    const children = el(
      doc,
      "ul",
      { class: "outline-children" },
      node.children.map((child, i) =>
        el(doc, "li", {}, [this.renderOutlineNode(child, node, i, node.children)]),
      ),
    );
    return el(doc, "div", { class: "outline-node" }, [row, node.children.length ? children : null]);
  }

  private renderOutlinePanel(): HTMLElement {
    const doc = this.doc;
    const session = this.session!;
    const outlineState = session.status.outline.state;
    const roots = session.outline?.roots ?? [];
    const tree = el(
      doc,
      "nav",
      { id: "outline-tree", class: "outline-tree", "aria-label": "table of contents" },
      roots.map((root, i) =>
        el(doc, "div", {}, [this.renderOutlineNode(root, null, i, roots)]),
      ),
    );
    return el(doc, "section", { class: "panel", id: "outline-panel" }, [
      el(doc, "h2", {}, ["3. Table of contents"]),
      el(doc, "div", { class: "outline-actions" }, [
        el(doc, "button", {
          id: "regenerate-structure",
          type: "button",
          disabled: outlineState === "running" || session.hits.length === 0,
          onclick: () => void this.regenerateStructure(),
        }, [roots.length ? "Regenerate structure" : "Generate structure"]),
        el(doc, "button", {
          id: "add-root",
          type: "button",
          disabled: roots.length === 0,
          onclick: () => void this.addOutlineNode(null, "New section"),
        }, ["+ section"]),
        el(doc, "span", { class: "stage-state" }, [`status: ${outlineState}`]),
      ]),
      roots.length ? tree : el(doc, "p", { class: "hint" }, ["No outline yet — generate the structure."]),
    ]);
  }

  private renderSectionsPanel(): HTMLElement {
    const doc = this.doc;
    const session = this.session!;
    const roots = session.outline?.roots ?? [];
    const leaves = leafIds(roots);
    const generationState = session.status.generation.state;

    const titleOf = (nodeId: string): string => {
      const stack = [...roots];
      while (stack.length) {
        const node = stack.pop()!;
        if (node.node_id === nodeId) return node.title;
        stack.push(...node.children);
      }
      return nodeId;
    };

    const blocks = leaves.map((nodeId) => {
      const draft = session.sections[nodeId];
      const body = draft
        ? el(doc, "div", { class: "section-body" })
        : el(doc, "p", { class: "section-missing" }, ["not generated yet"]);
      if (draft) {
        body.innerHTML = renderSectionHtml(draft.text, draft.unresolved, session.link_template);
      }
      return el(doc, "article", { class: "section-block", "data-node": nodeId }, [
        el(doc, "h3", {}, [titleOf(nodeId)]),
        el(doc, "button", {
          class: "generate-one",
          type: "button",
          disabled: generationState === "running",
          onclick: () => void this.generateOne(nodeId),
        }, [draft ? "Regenerate" : "Generate"]),
        draft && draft.unresolved.length
          ? el(doc, "p", { class: "unresolved-note" }, [
              `⚠ ${draft.unresolved.length} unresolved citation(s) kept visible below`,
            ])
          : null,
        body,
      ]);
    });

    return el(doc, "section", { class: "panel", id: "sections-panel" }, [
      el(doc, "h2", {}, ["4. Section content"]),
      el(doc, "div", { class: "generation-actions" }, [
        el(doc, "button", {
          id: "generate-all",
          type: "button",
          disabled: leaves.length === 0 || generationState === "running",
          onclick: () => void this.generateAllSections(),
        }, ["Generate all"]),
        el(doc, "span", { class: "stage-state" }, [`status: ${generationState}`]),
      ]),
      ...blocks,
    ]);
  }

  private renderReportPanel(): HTMLElement {
    const doc = this.doc;
    const session = this.session!;
    const ready = session.outline !== null;
    return el(doc, "section", { class: "panel", id: "report-panel" }, [
      el(doc, "h2", {}, ["5. Report"]),
      el(doc, "button", {
        id: "download-report",
        type: "button",
        disabled: !ready,
        onclick: () => void this.downloadReport(),
      }, ["Download report.html"]),
      el(doc, "a", {
        id: "print-view",
        target: "_blank",
        rel: "noopener",
        href: this.api.reportHtmlUrl(session.session_id),
      }, ["Open print view (save as PDF)"]),
      el(doc, "a", {
        id: "markdown-view",
        target: "_blank",
        rel: "noopener",
        href: this.api.reportMdUrl(session.session_id),
      }, ["Markdown"]),
      this.lastDownload
        ? el(doc, "p", { class: "download-note", id: "download-note" }, [
            `downloaded ${this.lastDownload.filename} (${this.lastDownload.content.length} chars)`,
          ])
        : null,
    ]);
  }
}

export function initApp(root: HTMLElement, options: AppOptions = {}): App {
  return new App(root, options);
}
