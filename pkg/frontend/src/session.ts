import type { Grounding, JobStatus, RetrievedChunk } from "./api.js";

// All UI state is derived from API responses; nothing here is computed
// client-side beyond remembering what the server last said.
export interface UiSession {
  currentQuery: string;
  generator: string;
  lastRetrieved: RetrievedChunk[];
  lastScript: string | null;
  lastGrounding: Grounding | null;
  jobs: Map<string, JobStatus>;
}

export function newSession(): UiSession {
  return {
    currentQuery: "",
    generator: "grounded",
    lastRetrieved: [],
    lastScript: null,
    lastGrounding: null,
    jobs: new Map(),
  };
}
