/** HTML construction for the results grid. Kept free of fetch and app
 * state so it can be tested with plain data.
 */

import type { SearchResult } from "./types";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

function cardHtml(result: SearchResult, uploaded: boolean): string {
  const title = escapeHtml(result.title || result.doc_id);
  const link = result.resource_url
    ? `<a href="${escapeHtml(result.resource_url)}" target="_blank" rel="noopener">${title}</a>`
    : title;
  const badge = uploaded ? `<span class="upload-badge">your upload</span>` : "";
  return `
    <div class="result-card${uploaded ? " uploaded" : ""}" data-doc-id="${escapeHtml(result.doc_id)}">
      <img src="${escapeHtml(result.image_url)}" alt="${title}" loading="lazy">
      <span class="title">${link}</span>
      ${badge}
      <span class="meta">${escapeHtml(result.doc_type || "document")}
        &middot; rank ${result.rank}
        &middot; score <span class="score">${escapeHtml(String(result.score))}</span></span>
    </div>`;
}

/** Fill the grid, one card per result in the order the server ranked them. */
export function renderResults(
  grid: HTMLElement,
  results: SearchResult[],
  uploadedIds: ReadonlySet<string>,
): void {
  if (results.length === 0) {
    grid.innerHTML = `<p class="muted">No results.</p>`;
    return;
  }
  grid.innerHTML = results.map((r) => cardHtml(r, uploadedIds.has(r.doc_id))).join("\n");
}

export function renderDocIdList(target: HTMLElement, docIds: Iterable<string>): void {
  target.innerHTML = [...docIds].map((d) => `<code>${escapeHtml(d)}</code>`).join(", ");
}
