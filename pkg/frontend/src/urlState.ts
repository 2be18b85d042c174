/** Query text, result count and session id live in the URL so a view can
 * be shared or restored after a reload. The session id is what keeps
 * non-persisted uploads visible across a refresh.
 */

export const DEFAULT_K = 5;

export interface UrlState {
  q: string;
  k: number;
  session: string;
}

export function readState(search: string = window.location.search): UrlState {
  const params = new URLSearchParams(search);
  const rawK = parseInt(params.get("k") ?? "", 10);
  return {
    q: params.get("q") ?? "",
    k: Number.isFinite(rawK) && rawK > 0 ? rawK : DEFAULT_K,
    session: params.get("session") ?? "",
  };
}

export function writeState(state: UrlState, replace = false): void {
  const params = new URLSearchParams(window.location.search);
  const set = (key: string, value: string, skip: boolean) => {
    if (skip) params.delete(key);
    else params.set(key, value);
  };
  set("q", state.q, state.q === "");
  set("k", String(state.k), state.k === DEFAULT_K);
  set("session", state.session, state.session === "");
  const qs = params.toString();
  const next = window.location.pathname + (qs ? "?" + qs : "");
  if (replace) history.replaceState(null, "", next);
  else history.pushState(null, "", next);
}

export function newSessionId(): string {
  if (typeof crypto !== "undefined" && crypto.randomUUID) {
    return crypto.randomUUID().slice(0, 13);
  }
  return "s-" + Math.random().toString(36).slice(2, 12);
}
