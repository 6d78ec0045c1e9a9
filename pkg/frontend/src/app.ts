import { ApiClient } from "./api.js";
import { newSession } from "./session.js";
import { DashboardView } from "./views/dashboard.js";
import { GenerateView } from "./views/generate.js";
import { KnowledgeView } from "./views/knowledge.js";

export class App {
  readonly root: HTMLElement;
  readonly knowledge: KnowledgeView;
  readonly generate: GenerateView;
  readonly dashboard: DashboardView;

  constructor(api: ApiClient) {
    const session = newSession();
    this.knowledge = new KnowledgeView(api);
    this.generate = new GenerateView(api, session);
    this.dashboard = new DashboardView(api, session);

    this.root = document.createElement("div");
    this.root.className = "app";
    const nav = document.createElement("nav");
    const main = document.createElement("main");
    const tabs: [string, HTMLElement][] = [
      ["Knowledge Base", this.knowledge.root],
      ["Generate", this.generate.root],
      ["Dashboard", this.dashboard.root],
    ];
    for (const [label, view] of tabs) {
      const btn = document.createElement("button");
      btn.textContent = label;
      btn.className = "tab";
      btn.addEventListener("click", () => {
        main.replaceChildren(view);
        nav.querySelectorAll(".tab").forEach((t) => t.classList.remove("active"));
        btn.classList.add("active");
      });
      nav.append(btn);
    }
    main.replaceChildren(this.knowledge.root);
    nav.querySelector(".tab")?.classList.add("active");
    this.root.append(nav, main);
  }
}
