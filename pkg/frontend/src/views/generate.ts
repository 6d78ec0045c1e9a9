import { ApiClient, ApiError } from "../api.js";
import { badgeElement } from "../badges.js";
import type { UiSession } from "../session.js";

// Generation view: the two-stage loop. A query first becomes editable
// natural-language steps (/generate-test-cases), then a script with a
// per-locator grounding badge (/generate-script), then a trace timeline
// (/execute). Badge colors map 1:1 to the server's resolution preview.

export class GenerateView {
  readonly root: HTMLElement;
  private stepsBox: HTMLElement;
  private scriptPane: HTMLElement;
  private badges: HTMLElement;
  private timeline: HTMLElement;
  private message: HTMLElement;
  private queryInput: HTMLInputElement;
  private generatorSelect: HTMLSelectElement;

  constructor(
    private api: ApiClient,
    private session: UiSession,
  ) {
    this.root = document.createElement("section");
    this.root.className = "view view-generate";
    this.root.innerHTML = `
      <h2>Generate</h2>
      <form class="query-form">
        <input type="text" data-role="query" placeholder="e.g. Add headphones to cart">
        <select data-role="generator">
          <option value="grounded">grounded</option>
          <option value="ungrounded">ungrounded</option>
          <option value="text-only">text-only</option>
          <option value="html-only">html-only</option>
        </select>
        <button type="submit" data-role="gen-steps">Generate steps</button>
        <button type="button" data-role="gen-script">Generate script</button>
      </form>
      <div data-role="message" class="message"></div>
      <div data-role="steps" class="steps"></div>
      <div class="script-area">
        <pre data-role="script" class="script-pane"></pre>
        <div data-role="badges" class="grounding-badges"></div>
      </div>
      <button type="button" data-role="execute" disabled>Execute</button>
      <ol data-role="timeline" class="timeline"></ol>
    `;
    this.stepsBox = this.root.querySelector('[data-role="steps"]')!;
    this.scriptPane = this.root.querySelector('[data-role="script"]')!;
    this.badges = this.root.querySelector('[data-role="badges"]')!;
    this.timeline = this.root.querySelector('[data-role="timeline"]')!;
    this.message = this.root.querySelector('[data-role="message"]')!;
    this.queryInput = this.root.querySelector('[data-role="query"]')!;
    this.generatorSelect = this.root.querySelector('[data-role="generator"]')!;

    this.root.querySelector("form")!.addEventListener("submit", (ev) => {
      ev.preventDefault();
      void this.generateSteps();
    });
    this.root
      .querySelector('[data-role="gen-script"]')!
      .addEventListener("click", () => void this.generateScript());
    this.root
      .querySelector('[data-role="execute"]')!
      .addEventListener("click", () => void this.executeScript());
  }

  private syncSession(): void {
    this.session.currentQuery = this.queryInput.value.trim();
    this.session.generator = this.generatorSelect.value;
  }

  setQuery(query: string, generator?: string): void {
    this.queryInput.value = query;
    if (generator) this.generatorSelect.value = generator;
    this.syncSession();
  }

  async generateSteps(): Promise<void> {
    this.syncSession();
    this.message.replaceChildren();
    if (!this.session.currentQuery) return;
    try {
      const res = await this.api.generateTestCases(
        this.session.currentQuery,
        this.session.generator,
      );
      this.session.lastRetrieved = res.retrieved;
      this.stepsBox.replaceChildren(
        ...res.steps.map((step) => {
          const row = document.createElement("textarea");
          row.className = "step-row";
          row.value = step;
          return row;
        }),
      );
      const summary = document.createElement("p");
      summary.className = "retrieved-summary";
      summary.textContent =
        "retrieved: " +
        res.retrieved
          .map((r) => `${r.chunk_id} (${r.score.toFixed(3)})`)
          .join(", ");
      this.stepsBox.append(summary);
    } catch (err) {
      this.showError(err);
    }
  }

  async generateScript(): Promise<void> {
    this.syncSession();
    this.message.replaceChildren();
    if (!this.session.currentQuery) return;
    try {
      const res = await this.api.generateScript(
        this.session.currentQuery,
        this.session.generator,
      );
      this.session.lastScript = res.script;
      this.session.lastGrounding = res.grounding;
      this.scriptPane.textContent = res.script;
      this.badges.replaceChildren();
      if (res.syntax_error) {
        this.message.textContent = `syntax error at line ${res.syntax_error.line}: ${res.syntax_error.reason}`;
        return;
      }
      for (const step of res.grounding?.steps ?? []) {
        this.badges.append(
          badgeElement(step.outcome, `${step.locator} @${step.page}`),
        );
      }
      const exec = this.root.querySelector<HTMLButtonElement>('[data-role="execute"]')!;
      exec.disabled = false;
    } catch (err) {
      this.showError(err);
    }
  }

  async executeScript(): Promise<void> {
    if (!this.session.lastScript) return;
    this.timeline.replaceChildren();
    try {
      const res = await this.api.execute(this.session.lastScript);
      for (const step of res.steps) {
        const li = document.createElement("li");
        li.append(
          badgeElement(step.outcome, step.outcome),
          ` ${step.action} @${step.page}` + (step.detail ? ` — ${step.detail}` : ""),
        );
        this.timeline.append(li);
      }
      const li = document.createElement("li");
      li.className = "timeline-summary";
      li.textContent = `goal_met: ${res.goal_met}, success: ${res.execution_success}`;
      this.timeline.append(li);
    } catch (err) {
      this.showError(err);
    }
  }

  private showError(err: unknown): void {
    if (err instanceof ApiError && err.status === 409) {
      this.message.textContent =
        "The knowledge base is empty — ingest documents first (Knowledge Base tab).";
    } else if (err instanceof ApiError) {
      this.message.textContent = `${err.code}: ${err.message}`;
    } else {
      this.message.textContent = String(err);
    }
  }
}
