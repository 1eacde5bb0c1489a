// Bootstrap: pick a batch (?batch= or the first open one), resolve the
// annotator id (?annotator= or localStorage), start the session.

import { ReviewApi } from "./api";
import { ReviewSession } from "./session";
import { mount } from "./ui";

function annotatorId(params: URLSearchParams): string {
  const fromQuery = params.get("annotator");
  if (fromQuery) {
    localStorage.setItem("annotator", fromQuery);
    return fromQuery;
  }
  const stored = localStorage.getItem("annotator");
  if (stored) return stored;
  const generated = `ann-${Math.random().toString(36).slice(2, 10)}`;
  localStorage.setItem("annotator", generated);
  return generated;
}

async function pickBatch(api: ReviewApi, params: URLSearchParams): Promise<string | null> {
  const fromQuery = params.get("batch");
  if (fromQuery) return fromQuery;
  const batches = await api.listBatches();
  const open = batches.find((batch) => batch.status === "open");
  return open?.id ?? null;
}

async function boot(): Promise<void> {
  const container = document.getElementById("app");
  if (!container) throw new Error("missing #app container");
  const params = new URLSearchParams(window.location.search);
  const api = new ReviewApi("");
  const batchId = await pickBatch(api, params);
  if (batchId === null) {
    container.textContent = "No open review batches.";
    return;
  }
  const session = new ReviewSession(api, batchId, annotatorId(params));
  mount(session, container);
  await session.start();
}

void boot();
