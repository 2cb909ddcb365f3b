/** Client-side session view-model: batch selections, submit gating, and the
 * reconciliation rules against server snapshots.
 *
 * The server is the source of truth: a completed submission clears all local
 * label state, and a 409 (out-of-state submission) triggers a refresh without
 * discarding the annotator's selections.
 */

import type { QueryItem, SessionSnapshot } from "./api.js";

export interface UiSessionView {
  snapshot: SessionSnapshot | null;
  items: QueryItem[];
  /** group_id -> chosen class index; only for the current batch */
  selections: Map<string, number>;
  /** set when a 409 told us our batch view is stale */
  needsRefresh: boolean;
  /** transient banner message */
  notice: string | null;
}

export function emptyView(): UiSessionView {
  return {
    snapshot: null,
    items: [],
    selections: new Map(),
    needsRefresh: false,
    notice: null,
  };
}

/** Submit is enabled only when every batch item has a selected label. */
export function canSubmit(view: UiSessionView): boolean {
  return (
    view.items.length > 0 &&
    view.items.every((it) => view.selections.has(it.group_id)) &&
    view.snapshot?.state === "awaiting_labels"
  );
}

export function selectLabel(
  view: UiSessionView,
  groupId: string,
  classIndex: number,
): void {
  const item = view.items.find((it) => it.group_id === groupId);
  if (!item) return;
  if (classIndex < 0 || classIndex >= item.classes.length) return;
  view.selections.set(groupId, classIndex);
}

/** Merge a fresh server snapshot into the view. */
export function applySnapshot(
  view: UiSessionView,
  snapshot: SessionSnapshot,
): void {
  const prevState = view.snapshot?.state;
  view.snapshot = snapshot;
  if (snapshot.state !== "awaiting_labels" && prevState === "awaiting_labels") {
    // round closed server-side; local batch state is obsolete
    view.items = [];
    view.selections = new Map();
  }
}

/** Replace the current batch after fetching queries. Selections for groups
 * no longer pending are dropped; the rest survive (no data loss on refresh). */
export function applyQueries(view: UiSessionView, items: QueryItem[]): void {
  view.items = items;
  view.needsRefresh = false;
  const pending = new Set(items.map((it) => it.group_id));
  for (const gid of [...view.selections.keys()]) {
    if (!pending.has(gid)) view.selections.delete(gid);
  }
}

/** After a successful submission the server owns the labels. */
export function onSubmitSuccess(view: UiSessionView): void {
  view.items = [];
  view.selections = new Map();
  view.notice = "Labels submitted - waiting for the next round";
}

/** A 409 means the session left awaiting_labels under us: refresh, but keep
 * the selections so nothing the annotator chose is lost. */
export function onSubmitConflict(view: UiSessionView): void {
  view.needsRefresh = true;
  view.notice = "Session state changed - refreshing";
}

/** Number of batch items still without a selection. */
export function unlabeledCount(view: UiSessionView): number {
  return view.items.filter((it) => !view.selections.has(it.group_id)).length;
}

/** Status line for the current state, shown above the batch grid. */
export function statusText(view: UiSessionView): string {
  const s = view.snapshot;
  if (!s) return "Connecting...";
  switch (s.state) {
    case "training":
      return `Model training... (round ${s.round} of ${s.rounds_total})`;
    case "selecting":
      return `Selecting the next batch... (round ${s.round} of ${s.rounds_total})`;
    case "awaiting_labels":
      return `Round ${s.round}: label ${s.pending_count} groups`;
    case "finished":
      return `Finished: ${s.labeled_count} groups labeled over ${s.rounds_total} rounds`;
    case "failed":
      return `Session failed: ${s.error ?? "unknown error"}`;
  }
}

/** Inputs are disabled whenever the server is not accepting labels. */
export function inputsDisabled(view: UiSessionView): boolean {
  return view.snapshot?.state !== "awaiting_labels";
}
