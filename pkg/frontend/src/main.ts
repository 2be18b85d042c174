import { ApiClient } from "./api";
import { App } from "./app";

/** The engine base URL comes from ?api=... (handy in development) or the
 * ras-api-base meta tag; empty means same origin. */
export function apiBase(): string {
  const fromUrl = new URLSearchParams(window.location.search).get("api");
  if (fromUrl) return fromUrl;
  const meta = document.querySelector<HTMLMetaElement>('meta[name="ras-api-base"]');
  return meta?.content ?? "";
}

const app = new App(new ApiClient(apiBase()));
void app.start();
