/** Wire shapes returned by the search engine's HTTP API. */

export interface SearchResult {
  doc_id: string;
  title: string;
  image_url: string;
  resource_url: string;
  doc_type: string;
  score: number;
  rank: number;
}

export interface SearchResponse {
  results: SearchResult[];
  corpus_epoch: number;
  latency_ms: number;
}

export interface UploadResponse {
  added: string[];
  corpus_epoch: number;
}

export interface AnalyzeResponse {
  text: string;
  model_id: string;
  latency_ms: number;
}

export interface StatsResponse {
  documents: number;
  shards: number;
  dim: number;
  epoch: number;
  memory_bytes: number;
}
