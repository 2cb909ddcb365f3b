/** Application entry point: session creation form, 2s polling loop, and the
 * submit flow with 409 -> refresh handling.
 */

import { ApiClient, ApiError } from "./api.js";
import {
  applyQueries,
  applySnapshot,
  canSubmit,
  emptyView,
  onSubmitConflict,
  onSubmitSuccess,
  selectLabel,
  UiSessionView,
} from "./state.js";
import { handleKey, render, ViewCallbacks } from "./view.js";

const POLL_INTERVAL_MS = 2000;

export class App {
  private view: UiSessionView = emptyView();
  private sessionId: string | null = null;
  private timer: ReturnType<typeof setInterval> | null = null;
  private submitting = false;

  constructor(
    private readonly api: ApiClient,
    private readonly root: HTMLElement,
  ) {}

  private readonly callbacks: ViewCallbacks = {
    onSelect: (groupId, classIndex) => {
      selectLabel(this.view, groupId, classIndex);
      this.draw();
    },
    onSubmit: () => void this.submit(),
  };

  private draw(): void {
    render(this.root, this.view, this.callbacks);
  }

  async start(sessionId: string): Promise<void> {
    this.sessionId = sessionId;
    this.view = emptyView();
    this.draw();
    await this.poll();
    this.timer = setInterval(() => void this.poll(), POLL_INTERVAL_MS);
  }

  stop(): void {
    if (this.timer !== null) clearInterval(this.timer);
    this.timer = null;
  }

  async poll(): Promise<void> {
    if (!this.sessionId) return;
    try {
      const snapshot = await this.api.getSession(this.sessionId);
      applySnapshot(this.view, snapshot);
      const needItems =
        snapshot.state === "awaiting_labels" &&
        (this.view.items.length === 0 || this.view.needsRefresh);
      if (needItems) {
        const { items } = await this.api.getQueries(this.sessionId);
        applyQueries(this.view, items);
      }
      if (snapshot.state === "finished" || snapshot.state === "failed") {
        this.stop();
      }
    } catch (err) {
      this.view.notice =
        err instanceof ApiError
          ? `Server error: ${err.message}`
          : "Cannot reach the labeling service";
    }
    this.draw();
  }

  async submit(): Promise<void> {
    if (!this.sessionId || this.submitting || !canSubmit(this.view)) return;
    this.submitting = true;
    const labels: Record<string, number> = {};
    for (const [gid, idx] of this.view.selections) labels[gid] = idx;
    try {
      await this.api.submitLabels(this.sessionId, labels);
      onSubmitSuccess(this.view);
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        onSubmitConflict(this.view);
        await this.poll();
      } else {
        this.view.notice =
          err instanceof ApiError
            ? `Submission rejected: ${err.message}`
            : "Cannot reach the labeling service";
      }
    } finally {
      this.submitting = false;
    }
    this.draw();
  }

  handleKeydown(key: string): void {
    if (handleKey(this.view, key, this.callbacks)) this.draw();
  }
}

function readNumber(form: HTMLFormElement, name: string): number | undefined {
  const input = form.elements.namedItem(name) as HTMLInputElement | null;
  if (!input || input.value.trim() === "") return undefined;
  const value = Number(input.value);
  return Number.isFinite(value) ? value : undefined;
}

async function boot(): Promise<void> {
  const api = new ApiClient();
  const root = document.getElementById("session")!;
  const form = document.getElementById("setup") as HTMLFormElement;
  const formError = document.getElementById("setup-error")!;
  const app = new App(api, root);

  document.addEventListener("keydown", (ev) => {
    const target = ev.target as HTMLElement | null;
    if (target && (target.tagName === "INPUT" || target.tagName === "SELECT")) {
      return;
    }
    app.handleKeydown(ev.key);
  });

  form.addEventListener("submit", async (ev) => {
    ev.preventDefault();
    formError.textContent = "";
    const strategy = (form.elements.namedItem("strategy") as HTMLSelectElement)
      .value;
    try {
      const { id } = await api.createSession({
        strategy,
        rounds: readNumber(form, "rounds"),
        n_batch: readNumber(form, "n_batch"),
        seed: readNumber(form, "seed"),
      });
      form.classList.add("hidden");
      await app.start(id);
    } catch (err) {
      formError.textContent =
        err instanceof ApiError
          ? `Could not start session: ${err.message}`
          : "Cannot reach the labeling service";
    }
  });

  try {
    await api.health();
  } catch {
    formError.textContent = "Labeling service is not reachable";
  }
}

if (typeof document !== "undefined" && document.getElementById("setup")) {
  void boot();
}
