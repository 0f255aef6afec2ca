// DOM shell: wires the pure state machine and renderers to one browser
// tab. One active session per tab; queries are polled with backoff.

import { ApiClient, pollQuery } from "./api.js";
import { summaryAsJson, summaryAsText } from "./export.js";
import { renderView } from "./render.js";
import { feedbackFlow, rejectSentence, startSession } from "./state.js";
import { EnteredValues, SessionView } from "./types.js";

export class App {
  private view: SessionView | null = null;
  private client: ApiClient;

  constructor(
    private root: HTMLElement,
    baseUrl: string = "",
  ) {
    this.client = new ApiClient(baseUrl);
  }

  async start(mode: "adaptive" | "sumrecom", corpusId: string, budget: number, seed = 0) {
    this.view = await startSession(this.client, { mode, corpusId, budget, seed });
    this.draw();
  }

  private draw() {
    if (!this.view) return;
    this.root.innerHTML = renderView(this.view);
    this.wire();
  }

  private gather(card: Element): EnteredValues {
    const weight = card.querySelector<HTMLInputElement>("input.weight");
    const confidence = card.querySelector<HTMLInputElement>("input.confidence");
    return {
      weight: weight ? Number(weight.value) : undefined,
      confidence: confidence ? Number(confidence.value) : undefined,
    };
  }

  private wire() {
    this.root.querySelectorAll<HTMLButtonElement>("button.accept, button.reject").forEach((btn) => {
      btn.addEventListener("click", async () => {
        if (!this.view) return;
        const card = btn.closest(".concept-card");
        const entered: EnteredValues = {
          conceptId: Number(btn.dataset.conceptId),
          action: btn.classList.contains("accept") ? 1 : -1,
          ...(card ? this.gather(card) : {}),
        };
        this.view = await feedbackFlow(this.client, this.view, entered);
        this.draw();
      });
    });

    this.root.querySelectorAll<HTMLButtonElement>("button.pick").forEach((btn) => {
      btn.addEventListener("click", async () => {
        if (!this.view) return;
        this.view = await feedbackFlow(this.client, this.view, {
          winner: btn.dataset.winner as "left" | "right",
        });
        this.draw();
      });
    });

    this.root.querySelectorAll<HTMLButtonElement>("button.drop").forEach((btn) => {
      btn.addEventListener("click", async () => {
        if (!this.view) return;
        this.view = await rejectSentence(this.client, this.view, Number(btn.dataset.sentenceId));
        this.draw();
      });
    });

    const exportText = this.root.querySelector<HTMLButtonElement>("#export-text");
    if (exportText) {
      exportText.addEventListener("click", () => {
        if (this.view?.summary) this.download("summary.txt", summaryAsText(this.view.summary));
      });
    }
    const exportJson = this.root.querySelector<HTMLButtonElement>("#export-json");
    if (exportJson) {
      exportJson.addEventListener("click", () => {
        if (this.view) this.download("session.json", summaryAsJson(this.view));
      });
    }
  }

  private download(name: string, content: string) {
    const blob = new Blob([content], { type: "text/plain" });
    const a = document.createElement("a");
    a.href = URL.createObjectURL(blob);
    a.download = name;
    a.click();
    URL.revokeObjectURL(a.href);
  }

  async poll() {
    if (!this.view || this.view.status === "converged") return;
    const query = await pollQuery(this.client, this.view.sessionId);
    if (this.view && query.query) {
      this.view = { ...this.view, pending: query.query, status: query.status };
      this.draw();
    }
  }
}

declare global {
  interface Window {
    persumApp?: App;
  }
}

export function mount(rootId = "app", baseUrl = ""): App {
  const root = document.getElementById(rootId);
  if (!root) throw new Error(`no element with id ${rootId}`);
  const app = new App(root, baseUrl);
  window.persumApp = app;
  return app;
}
