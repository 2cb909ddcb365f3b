/** DOM rendering of the session view: batch cards, class buttons, status,
 * progress, and the metrics chart. Rendering is a pure function of the
 * view-model; all mutations flow through the callbacks.
 */

import { renderChartSvg } from "./chart.js";
import {
  canSubmit,
  inputsDisabled,
  statusText,
  UiSessionView,
  unlabeledCount,
} from "./state.js";

export interface ViewCallbacks {
  onSelect(groupId: string, classIndex: number): void;
  onSubmit(): void;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function pngSrc(b64: string): string {
  return `data:image/png;base64,${b64}`;
}

function renderCard(
  view: UiSessionView,
  item: { group_id: string; classes: string[]; observed_png: string; variant_pngs: string[] },
  callbacks: ViewCallbacks,
): HTMLElement {
  const card = el("div", "card");
  card.dataset.groupId = item.group_id;

  const title = el("div", "card-title", item.group_id);
  card.appendChild(title);

  const observed = el("img", "observed") as HTMLImageElement;
  observed.src = pngSrc(item.observed_png);
  observed.alt = `observed depth image for ${item.group_id}`;
  card.appendChild(observed);

  const thumbs = el("div", "variants");
  item.variant_pngs.forEach((png, i) => {
    const img = el("img", "variant") as HTMLImageElement;
    img.src = pngSrc(png);
    img.alt = `variant ${i + 1} for ${item.group_id}`;
    thumbs.appendChild(img);
  });
  card.appendChild(thumbs);

  const buttons = el("div", "class-buttons");
  const selected = view.selections.get(item.group_id);
  item.classes.forEach((name, idx) => {
    const btn = el("button", "class-btn", `${idx + 1} ${name}`);
    btn.type = "button";
    btn.disabled = inputsDisabled(view);
    if (selected === idx) btn.classList.add("selected");
    btn.addEventListener("click", () => callbacks.onSelect(item.group_id, idx));
    buttons.appendChild(btn);
  });
  card.appendChild(buttons);
  if (selected !== undefined) card.classList.add("labeled");
  return card;
}

export function render(
  root: HTMLElement,
  view: UiSessionView,
  callbacks: ViewCallbacks,
): void {
  root.textContent = "";

  const status = el("div", "status", statusText(view));
  if (view.snapshot?.state === "failed") status.classList.add("error");
  root.appendChild(status);

  if (view.notice) {
    root.appendChild(el("div", "notice", view.notice));
  }

  const grid = el("div", "grid");
  for (const item of view.items) {
    grid.appendChild(renderCard(view, item, callbacks));
  }
  root.appendChild(grid);

  if (view.items.length > 0) {
    const bar = el("div", "submit-bar");
    const remaining = unlabeledCount(view);
    bar.appendChild(
      el(
        "span",
        "remaining",
        remaining === 0
          ? "All items labeled"
          : `${remaining} item${remaining === 1 ? "" : "s"} left`,
      ),
    );
    const submit = el("button", "submit-btn", "Submit labels");
    submit.type = "button";
    submit.disabled = !canSubmit(view);
    submit.addEventListener("click", () => callbacks.onSubmit());
    bar.appendChild(submit);
    root.appendChild(bar);
  }

  const metricsBox = el("div", "metrics");
  metricsBox.appendChild(el("h2", undefined, "Accuracy over rounds"));
  metricsBox.insertAdjacentHTML(
    "beforeend",
    renderChartSvg(view.snapshot?.metrics ?? []),
  );
  if (view.snapshot) {
    const link = el("a", "csv-link", "metrics.csv") as HTMLAnchorElement;
    link.href = `/api/sessions/${view.snapshot.id}/metrics.csv`;
    link.target = "_blank";
    metricsBox.appendChild(link);
  }
  root.appendChild(metricsBox);
}

/** Keyboard shortcuts 1..C label the first still-unlabeled card. */
export function handleKey(
  view: UiSessionView,
  key: string,
  callbacks: ViewCallbacks,
): boolean {
  if (inputsDisabled(view)) return false;
  const idx = parseInt(key, 10) - 1;
  if (Number.isNaN(idx) || idx < 0) return false;
  const target = view.items.find((it) => !view.selections.has(it.group_id));
  if (!target || idx >= target.classes.length) return false;
  callbacks.onSelect(target.group_id, idx);
  return true;
}
