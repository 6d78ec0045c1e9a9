import { ApiClient } from "./api.js";
import { App } from "./app.js";

const app = new App(new ApiClient(""));
document.getElementById("app")!.replaceChildren(app.root);
void app.knowledge.refresh().catch(() => {
  /* empty store on first load is fine */
});
