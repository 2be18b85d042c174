/** Wires the page to the engine API.
 *
 * State worth knowing about:
 *   - one search may be in flight at a time; further submits are ignored
 *     until it settles
 *   - analysis runs under an AbortController so the cancel button works
 *   - the corpus epoch of the current results is remembered; when an
 *     upload lands (ours or, via a newer epoch in any response, someone
 *     else's) a banner offers to re-run the search
 *   - non-persisted uploads are tied to a session id kept in the URL,
 *     which is also sent with every search so those documents rank
 */

import { ApiClient, ApiError } from "./api";
import { renderDocIdList, renderResults } from "./render";
import type { SearchResponse, SearchResult } from "./types";
import { DEFAULT_K, newSessionId, readState, writeState, type UrlState } from "./urlState";

function must<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
}

export class App {
  api: ApiClient;
  state: UrlState;

  lastResults: SearchResult[] = [];
  uploadedIds = new Set<string>();
  resultsEpoch: number | null = null;
  searching = false;
  analysisAbort: AbortController | null = null;
  private retryAction: (() => Promise<void>) | null = null;
  private queryImage: File | null = null;

  private searchForm = must<HTMLFormElement>("search-form");
  private queryInput = must<HTMLInputElement>("query-input");
  private kSelect = must<HTMLSelectElement>("k-select");
  private imageInput = must<HTMLInputElement>("image-input");
  private imagePreview = must<HTMLImageElement>("image-preview");
  private clearImageButton = must<HTMLButtonElement>("clear-image");
  private searchButton = must<HTMLButtonElement>("search-button");
  private statusBanner = must<HTMLElement>("status-banner");
  private statusMessage = must<HTMLElement>("status-message");
  private retryButton = must<HTMLButtonElement>("retry-button");
  private refreshBanner = must<HTMLElement>("refresh-banner");
  private refreshButton = must<HTMLButtonElement>("refresh-button");
  private sessionBanner = must<HTMLElement>("session-banner");
  private sessionDocIds = must<HTMLElement>("session-doc-ids");
  private resultsGrid = must<HTMLElement>("results-grid");
  private analyzeButton = must<HTMLButtonElement>("analyze-button");
  private cancelAnalysisButton = must<HTMLButtonElement>("cancel-analysis");
  private analysisStatus = must<HTMLElement>("analysis-status");
  private analysisText = must<HTMLElement>("analysis-text");
  private analysisModel = must<HTMLElement>("analysis-model");
  private uploadForm = must<HTMLFormElement>("upload-form");
  private uploadImages = must<HTMLInputElement>("upload-images");
  private shardInput = must<HTMLInputElement>("shard-input");
  private metadataInput = must<HTMLInputElement>("metadata-input");
  private persistToggle = must<HTMLInputElement>("persist-toggle");
  private uploadStatus = must<HTMLElement>("upload-status");

  constructor(api: ApiClient) {
    this.api = api;
    this.state = readState();

    this.searchForm.addEventListener("submit", (ev) => {
      ev.preventDefault();
      void this.submitSearch();
    });
    this.queryInput.addEventListener("input", () => this.updateControls());
    this.imageInput.addEventListener("change", () => this.onImageChosen());
    this.clearImageButton.addEventListener("click", () => this.clearQueryImage());
    this.retryButton.addEventListener("click", () => {
      const action = this.retryAction;
      this.hideError();
      if (action) void action();
    });
    this.refreshButton.addEventListener("click", () => {
      this.refreshBanner.hidden = true;
      void this.submitSearch();
    });
    this.analyzeButton.addEventListener("click", () => void this.runAnalysis());
    this.cancelAnalysisButton.addEventListener("click", () => this.cancelAnalysis());
    this.uploadForm.addEventListener("submit", (ev) => {
      ev.preventDefault();
      void this.submitUpload();
    });
    window.addEventListener("popstate", () => {
      this.state = readState();
      this.syncFormFromState();
      if (this.state.q) void this.submitSearch(false);
    });
  }

  /** Restore the view described by the URL, then run any saved query. */
  async start(): Promise<void> {
    this.syncFormFromState();
    this.updateControls();
    if (this.state.q) await this.submitSearch(false);
  }

  private syncFormFromState(): void {
    this.queryInput.value = this.state.q;
    const k = String(this.state.k);
    if ([...this.kSelect.options].some((o) => o.value === k)) {
      this.kSelect.value = k;
    }
  }

  private updateControls(): void {
    const hasQuery = this.queryInput.value.trim() !== "" || this.queryImage !== null;
    this.searchButton.disabled = this.searching || !hasQuery;
    this.analyzeButton.disabled = this.lastResults.length === 0 || this.analysisAbort !== null;
  }

  // -- searching ---------------------------------------------------------

  private onImageChosen(): void {
    const file = this.imageInput.files?.[0] ?? null;
    if (file && !file.type.startsWith("image/")) {
      this.showError(`"${file.name}" is not an image file`);
      this.imageInput.value = "";
      return;
    }
    this.queryImage = file;
    if (file) {
      this.imagePreview.src = URL.createObjectURL(file);
      this.imagePreview.hidden = false;
      this.clearImageButton.hidden = false;
    } else {
      this.clearQueryImage();
    }
    this.updateControls();
  }

  private clearQueryImage(): void {
    this.queryImage = null;
    this.imageInput.value = "";
    this.imagePreview.hidden = true;
    this.imagePreview.removeAttribute("src");
    this.clearImageButton.hidden = true;
    this.updateControls();
  }

  async submitSearch(pushUrl = true): Promise<void> {
    if (this.searching) return;
    const query = this.queryInput.value.trim();
    const k = parseInt(this.kSelect.value, 10) || DEFAULT_K;
    if (!query && !this.queryImage) return;

    this.searching = true;
    this.hideError();
    this.refreshBanner.hidden = true;
    this.searchButton.textContent = "Searching...";
    this.updateControls();
    try {
      const opts = { k, sessionId: this.state.session || undefined };
      const resp = this.queryImage
        ? await this.api.searchImage(this.queryImage, opts)
        : await this.api.searchText(query, opts);
      this.state = { ...this.state, q: this.queryImage ? "" : query, k };
      if (pushUrl && !this.queryImage) writeState(this.state);
      this.applySearchResponse(resp);
    } catch (err) {
      this.showError(err, () => this.submitSearch(false));
    } finally {
      this.searching = false;
      this.searchButton.textContent = "Search";
      this.updateControls();
    }
  }

  private applySearchResponse(resp: SearchResponse): void {
    this.lastResults = resp.results;
    this.resultsEpoch = resp.corpus_epoch;
    renderResults(this.resultsGrid, resp.results, this.uploadedIds);
    this.updateControls();
  }

  // -- analysis ----------------------------------------------------------

  async runAnalysis(): Promise<void> {
    if (this.lastResults.length === 0 || this.analysisAbort) return;
    const controller = new AbortController();
    this.analysisAbort = controller;
    this.analysisText.textContent = "";
    this.analysisModel.textContent = "";
    this.analysisStatus.textContent = "Analyzing...";
    this.cancelAnalysisButton.hidden = false;
    this.updateControls();
    try {
      const docIds = this.lastResults.map((r) => r.doc_id);
      const resp = await this.api.analyzeDocs(docIds, this.state.session, controller.signal);
      this.analysisText.textContent = resp.text;
      this.analysisModel.textContent = `model: ${resp.model_id}`;
      this.analysisStatus.textContent = "";
    } catch (err) {
      if (controller.signal.aborted) {
        this.analysisStatus.textContent = "Analysis cancelled.";
      } else {
        this.analysisStatus.textContent = "";
        this.showError(err, () => this.runAnalysis());
      }
    } finally {
      this.analysisAbort = null;
      this.cancelAnalysisButton.hidden = true;
      this.updateControls();
    }
  }

  cancelAnalysis(): void {
    this.analysisAbort?.abort();
  }

  // -- uploads -----------------------------------------------------------

  async submitUpload(): Promise<void> {
    const images = [...(this.uploadImages.files ?? [])];
    const shard = this.shardInput.files?.[0] ?? null;
    const metadata = this.metadataInput.files?.[0] ?? null;
    const badImage = images.find((f) => !f.type.startsWith("image/"));
    if (badImage) {
      this.uploadStatus.textContent = `"${badImage.name}" is not an image file`;
      return;
    }
    if (images.length === 0 && !shard) {
      this.uploadStatus.textContent = "Choose image files or a shard first.";
      return;
    }
    if (images.length > 0 && shard) {
      this.uploadStatus.textContent = "Choose images or a shard, not both.";
      return;
    }

    const persist = this.persistToggle.checked;
    if (!this.state.session) {
      this.state = { ...this.state, session: newSessionId() };
      writeState(this.state, true);
    }
    const opts = { persist, sessionId: this.state.session };
    this.uploadStatus.textContent = "Uploading...";
    try {
      const resp = shard
        ? await this.api.uploadShard(shard, metadata, opts)
        : await this.api.uploadImages(images, opts);
      for (const docId of resp.added) this.uploadedIds.add(docId);
      const scope = persist ? "permanently" : "for this session";
      this.uploadStatus.textContent = `Added ${resp.added.length} document(s) ${scope}.`;
      this.sessionBanner.hidden = false;
      renderDocIdList(this.sessionDocIds, this.uploadedIds);
      this.uploadForm.reset();
      this.noteEpoch(resp.corpus_epoch, true);
    } catch (err) {
      if (err instanceof ApiError && err.conflict) {
        this.uploadStatus.textContent = `Already in the corpus: ${err.message}`;
      } else {
        this.uploadStatus.textContent = "";
        this.showError(err, () => this.submitUpload());
      }
    }
  }

  /** An upload (or a response revealing a newer epoch) may have outdated
   * the grid; offer a refresh rather than silently mutating it. */
  private noteEpoch(epoch: number, corpusGrew: boolean): void {
    const stale =
      this.lastResults.length > 0 &&
      (corpusGrew || (this.resultsEpoch !== null && epoch > this.resultsEpoch));
    if (stale) this.refreshBanner.hidden = false;
  }

  // -- error banner ------------------------------------------------------

  private showError(err: unknown, retry?: () => Promise<void>): void {
    this.statusMessage.textContent = describe(err);
    this.statusBanner.hidden = false;
    const retryable = retry !== undefined && isRetryable(err);
    this.retryAction = retryable ? retry! : null;
    this.retryButton.hidden = !retryable;
  }

  private hideError(): void {
    this.statusBanner.hidden = true;
    this.retryAction = null;
  }
}

function describe(err: unknown): string {
  if (err instanceof ApiError) {
    return err.retryable ? `The server is busy or starting up: ${err.message}` : err.message;
  }
  return err instanceof Error ? err.message : String(err);
}

/** 503s and plain network failures are worth retrying; 4xx is not. */
function isRetryable(err: unknown): boolean {
  if (err instanceof ApiError) return err.retryable;
  return err instanceof Error;
}
