import { ApiClient, ApiError } from "../api.js";
import { statusBadge } from "../badges.js";

// Knowledge-base view: upload documents, inspect the indexed-source
// table, and surface id-collision warnings. The table is always a
// verbatim rendering of GET /stats.

const EXT_TO_TYPE: Record<string, string> = {
  md: "markdown",
  txt: "text",
  json: "json",
  html: "html",
  htm: "html",
};

export class KnowledgeView {
  readonly root: HTMLElement;
  private table: HTMLElement;
  private message: HTMLElement;
  private fileInput: HTMLInputElement;

  constructor(private api: ApiClient) {
    this.root = document.createElement("section");
    this.root.className = "view view-knowledge";
    this.root.innerHTML = `
      <h2>Knowledge Base</h2>
      <form class="upload-form">
        <input type="file" multiple
               accept=".md,.txt,.json,.html,.htm" data-role="files">
        <button type="submit">Upload &amp; index</button>
      </form>
      <div data-role="message" class="message"></div>
      <div data-role="table"></div>
    `;
    this.table = this.root.querySelector('[data-role="table"]')!;
    this.message = this.root.querySelector('[data-role="message"]')!;
    this.fileInput = this.root.querySelector('[data-role="files"]')!;
    this.root.querySelector("form")!.addEventListener("submit", (ev) => {
      ev.preventDefault();
      void this.uploadSelected();
    });
  }

  async uploadSelected(): Promise<void> {
    const files = Array.from(this.fileInput.files ?? []);
    if (!files.length) return;
    const docs = [];
    for (const file of files) {
      const ext = file.name.split(".").pop()?.toLowerCase() ?? "";
      docs.push({
        name: file.name,
        type: EXT_TO_TYPE[ext] ?? ext,
        content: await file.text(),
      });
    }
    await this.uploadDocuments(docs);
  }

  async uploadDocuments(
    docs: { name: string; type: string; content: string }[],
  ): Promise<void> {
    this.message.replaceChildren();
    try {
      const res = await this.api.ingest(docs);
      this.message.append(statusBadge(200), ` indexed ${res.chunks_indexed} chunks`);
      if (res.collisions.length) {
        const warn = document.createElement("div");
        warn.className = "collision-warning";
        warn.textContent =
          "duplicate ids: " +
          res.collisions.map((c) => `${c.source ?? ""}#${c.id}`).join(", ");
        this.message.append(warn);
      }
    } catch (err) {
      this.showError(err);
    }
    await this.refresh();
  }

  async refresh(): Promise<void> {
    const stats = await this.api.stats();
    const rows = stats.sources
      .map(
        (s) =>
          `<tr><td>${s.source_id}</td><td>${s.type}</td><td>${s.chunks}</td></tr>`,
      )
      .join("");
    const collisions = stats.collisions.length
      ? `<p class="collision-warning">collisions: ${stats.collisions
          .map((c) => `${c.source ?? c.page_id ?? ""}#${c.id}`)
          .join(", ")}</p>`
      : "";
    this.table.innerHTML = `
      <p>${stats.chunks} chunks indexed (dim ${stats.dim})</p>
      ${collisions}
      <table class="sources">
        <thead><tr><th>Source</th><th>Type</th><th>Chunks</th></tr></thead>
        <tbody>${rows}</tbody>
      </table>
    `;
  }

  private showError(err: unknown): void {
    if (err instanceof ApiError) {
      // surface the error envelope verbatim with a status badge
      this.message.append(
        statusBadge(err.status),
        ` ${err.code}: ${err.message}` +
          (err.detail ? ` — ${JSON.stringify(err.detail)}` : ""),
      );
    } else {
      this.message.textContent = String(err);
    }
  }
}
