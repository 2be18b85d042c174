/** Thin fetch wrapper around the engine's HTTP API.
 *
 * Every non-2xx response becomes an ApiError carrying the status and the
 * machine-readable code from the server's error envelope, so callers can
 * branch on `retryable` / `conflict` instead of string-matching messages.
 */

import type {
  AnalyzeResponse,
  SearchResponse,
  StatsResponse,
  UploadResponse,
} from "./types";

export class ApiError extends Error {
  status: number;
  code: string;

  constructor(status: number, code: string, message: string) {
    super(message);
    this.name = "ApiError";
    this.status = status;
    this.code = code;
  }

  /** Transient server-side conditions worth a retry button. */
  get retryable(): boolean {
    return this.status === 503;
  }

  get conflict(): boolean {
    return this.status === 409;
  }
}

async function raiseForStatus(resp: Response): Promise<void> {
  if (resp.ok) return;
  let code = "http_error";
  let message = `${resp.status} ${resp.statusText}`;
  try {
    const body = await resp.json();
    if (body && body.error) {
      code = body.error.code ?? code;
      message = body.error.message ?? message;
    }
  } catch {
    // non-JSON error body; keep the status line
  }
  throw new ApiError(resp.status, code, message);
}

export interface SearchOptions {
  k?: number;
  sessionId?: string;
}

export interface UploadOptions {
  persist?: boolean;
  sessionId?: string;
}

export class ApiClient {
  baseUrl: string;

  constructor(baseUrl: string) {
    // "" means same-origin; otherwise strip a trailing slash once.
    this.baseUrl = baseUrl.replace(/\/$/, "");
  }

  private url(path: string): string {
    return this.baseUrl + path;
  }

  private async postJson<T>(path: string, body: unknown, signal?: AbortSignal): Promise<T> {
    const resp = await fetch(this.url(path), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
      signal,
    });
    await raiseForStatus(resp);
    return (await resp.json()) as T;
  }

  async searchText(query: string, opts: SearchOptions = {}): Promise<SearchResponse> {
    const body: Record<string, unknown> = { query };
    if (opts.k !== undefined) body.k = opts.k;
    if (opts.sessionId) body.session_id = opts.sessionId;
    return this.postJson<SearchResponse>("/search", body);
  }

  async searchImage(image: File, opts: SearchOptions = {}): Promise<SearchResponse> {
    const form = new FormData();
    form.append("image", image);
    if (opts.k !== undefined) form.append("k", String(opts.k));
    if (opts.sessionId) form.append("session_id", opts.sessionId);
    const resp = await fetch(this.url("/search/image"), { method: "POST", body: form });
    await raiseForStatus(resp);
    return (await resp.json()) as SearchResponse;
  }

  async uploadImages(images: File[], opts: UploadOptions = {}): Promise<UploadResponse> {
    const form = new FormData();
    for (const file of images) form.append("images", file);
    return this.postUpload(form, opts);
  }

  async uploadShard(shard: File, metadata: File | null, opts: UploadOptions = {}): Promise<UploadResponse> {
    const form = new FormData();
    form.append("shard", shard);
    if (metadata) form.append("metadata", metadata);
    return this.postUpload(form, opts);
  }

  private async postUpload(form: FormData, opts: UploadOptions): Promise<UploadResponse> {
    form.append("persist", opts.persist ? "true" : "false");
    if (opts.sessionId) form.append("session_id", opts.sessionId);
    const resp = await fetch(this.url("/corpus/documents"), { method: "POST", body: form });
    await raiseForStatus(resp);
    return (await resp.json()) as UploadResponse;
  }

  async analyzeDocs(docIds: string[], sessionId: string, signal?: AbortSignal): Promise<AnalyzeResponse> {
    const body: Record<string, unknown> = { doc_ids: docIds };
    if (sessionId) body.session_id = sessionId;
    return this.postJson<AnalyzeResponse>("/analyze", body, signal);
  }

  async stats(): Promise<StatsResponse> {
    const resp = await fetch(this.url("/corpus/stats"));
    await raiseForStatus(resp);
    return (await resp.json()) as StatsResponse;
  }
}
