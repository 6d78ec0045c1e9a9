import { ApiClient, EvalReport, JobStatus } from "../api.js";
import type { UiSession } from "../session.js";

// Dashboard view: launch evaluation jobs and render completed reports as
// arm-comparison tables, per-metric bars, and the failure-mode
// breakdown. Every number shown is copied from the job's report JSON;
// pending jobs show a progress indicator and no partial tables.

const METRIC_ORDER = ["syntax_validity", "element_resolution", "execution_success"];
const METRIC_TITLES: Record<string, string> = {
  syntax_validity: "Syntax Validity (%)",
  element_resolution: "Element Resolution (%)",
  execution_success: "Execution Success (%)",
};
const FAILURE_MODES = ["syntax", "hallucination", "ambiguous", "timeout", "logic"];

export class DashboardView {
  readonly root: HTMLElement;
  private jobsBox: HTMLElement;
  private message: HTMLElement;
  pollIntervalMs = 1000; // never poll faster than 1s

  constructor(
    private api: ApiClient,
    private session: UiSession,
  ) {
    this.root = document.createElement("section");
    this.root.className = "view view-dashboard";
    this.root.innerHTML = `
      <h2>Evaluation Dashboard</h2>
      <form class="eval-form">
        <label><input type="checkbox" value="grounded" checked> grounded</label>
        <label><input type="checkbox" value="ungrounded" checked> ungrounded</label>
        <label><input type="checkbox" value="text-only"> text-only</label>
        <label><input type="checkbox" value="html-only"> html-only</label>
        <input type="text" data-role="seeds" value="42,123,456" size="12">
        <button type="submit">Run evaluation</button>
      </form>
      <div data-role="message" class="message"></div>
      <div data-role="jobs"></div>
    `;
    this.jobsBox = this.root.querySelector('[data-role="jobs"]')!;
    this.message = this.root.querySelector('[data-role="message"]')!;
    this.root.querySelector("form")!.addEventListener("submit", (ev) => {
      ev.preventDefault();
      void this.startJob();
    });
  }

  selectedArms(): string[] {
    return Array.from(
      this.root.querySelectorAll<HTMLInputElement>('input[type="checkbox"]:checked'),
    ).map((el) => el.value);
  }

  async startJob(arms?: string[], seeds?: number[]): Promise<string | null> {
    this.message.replaceChildren();
    const armList = arms ?? this.selectedArms();
    const seedList =
      seeds ??
      this.root
        .querySelector<HTMLInputElement>('[data-role="seeds"]')!
        .value.split(",")
        .map((s) => parseInt(s.trim(), 10))
        .filter((n) => !Number.isNaN(n));
    try {
      const { job_id } = await this.api.evaluate(armList, seedList);
      this.session.jobs.set(job_id, {
        job_id,
        status: "pending",
        arms: armList,
        seeds: seedList,
      });
      this.renderJobs();
      return job_id;
    } catch (err) {
      this.message.textContent = String(err);
      return null;
    }
  }

  /** Poll a job at >=1s intervals until it settles, re-rendering as it goes. */
  async pollJob(jobId: string): Promise<JobStatus> {
    for (;;) {
      const status = await this.api.jobStatus(jobId);
      this.session.jobs.set(jobId, status);
      this.renderJobs();
      if (status.status === "done" || status.status === "failed") {
        return status;
      }
      await new Promise((r) => setTimeout(r, this.pollIntervalMs));
    }
  }

  renderJobs(): void {
    this.jobsBox.replaceChildren();
    for (const job of this.session.jobs.values()) {
      this.jobsBox.append(this.renderJob(job));
    }
  }

  renderJob(job: JobStatus): HTMLElement {
    const box = document.createElement("div");
    box.className = "job";
    box.dataset.jobId = job.job_id;
    const head = document.createElement("p");
    head.textContent = `job ${job.job_id.slice(0, 8)} [${job.arms.join(", ")}] — ${job.status}`;
    box.append(head);
    if (job.status === "pending" || job.status === "running") {
      const progress = document.createElement("div");
      progress.className = "progress";
      progress.textContent = "running…";
      box.append(progress);
      return box; // no partial tables
    }
    if (job.status === "failed") {
      const err = document.createElement("pre");
      err.className = "error";
      err.textContent = job.error ?? "unknown failure";
      box.append(err);
      return box;
    }
    box.append(this.metricsTable(job.report!));
    box.append(this.metricsBars(job.report!));
    box.append(this.failureBreakdown(job.report!));
    return box;
  }

  metricsTable(report: EvalReport): HTMLTableElement {
    const table = document.createElement("table");
    table.className = "metrics";
    const header = report.arms.map((a) => `<th>${report.labels[a] ?? a}</th>`).join("");
    const rows = METRIC_ORDER.map((metric) => {
      const cells = report.arms
        .map((arm) => {
          const cell = report.metrics[metric]?.[arm];
          if (!cell) return "<td>—</td>";
          const std = cell.std === null ? "" : ` ± ${cell.std.toFixed(1)}`;
          return `<td>${cell.mean.toFixed(1)}${std}</td>`;
        })
        .join("");
      return `<tr data-metric="${metric}"><td>${METRIC_TITLES[metric]}</td>${cells}</tr>`;
    }).join("");
    table.innerHTML = `<thead><tr><th>Metric</th>${header}</tr></thead><tbody>${rows}</tbody>`;
    return table;
  }

  metricsBars(report: EvalReport): HTMLElement {
    const wrap = document.createElement("div");
    wrap.className = "bars";
    for (const metric of METRIC_ORDER) {
      const group = document.createElement("div");
      group.className = "bar-group";
      group.dataset.metric = metric;
      const title = document.createElement("h4");
      title.textContent = METRIC_TITLES[metric] ?? metric;
      group.append(title);
      for (const arm of report.arms) {
        const cell = report.metrics[metric]?.[arm];
        if (!cell) continue;
        const row = document.createElement("div");
        row.className = "bar-row";
        const bar = document.createElement("div");
        bar.className = "bar";
        bar.style.width = `${cell.mean}%`;
        row.append(bar, ` ${report.labels[arm] ?? arm}: ${cell.mean.toFixed(1)}`);
        group.append(row);
      }
      wrap.append(group);
    }
    return wrap;
  }

  failureBreakdown(report: EvalReport): HTMLTableElement {
    const table = document.createElement("table");
    table.className = "failures";
    const header = FAILURE_MODES.map((m) => `<th>${m}</th>`).join("");
    const rows = report.arms
      .map((arm) => {
        const counts = report.failure_modes[arm] ?? {};
        const cells = FAILURE_MODES.map(
          (m) => `<td data-mode="${m}">${counts[m] ?? 0}</td>`,
        ).join("");
        return `<tr><td>${report.labels[arm] ?? arm}</td>${cells}</tr>`;
      })
      .join("");
    table.innerHTML = `<thead><tr><th>Arm</th>${header}</tr></thead><tbody>${rows}</tbody>`;
    return table;
  }
}
