/**
 * Client-side change set between two bundle versions, computed from the
 * bundle documents alone so the server needs no diff endpoint.
 */

import type { ActivityDoc, BundleDoc } from "./api.js";

export interface ChangeSet {
  added: string[];
  removed: string[];
  changed: string[];
  unchanged: string[];
}

/** Key-sorted stringify so equal documents compare equal. */
export function stableStringify(value: unknown): string {
  if (Array.isArray(value)) {
    return `[${value.map(stableStringify).join(",")}]`;
  }
  if (typeof value === "object" && value !== null) {
    const entries = Object.entries(value as Record<string, unknown>)
      .sort(([a], [b]) => (a < b ? -1 : a > b ? 1 : 0))
      .map(([key, inner]) => `${JSON.stringify(key)}:${stableStringify(inner)}`);
    return `{${entries.join(",")}}`;
  }
  return JSON.stringify(value);
}

function activityIndex(bundle: BundleDoc): Map<string, ActivityDoc> {
  const index = new Map<string, ActivityDoc>();
  for (const activity of bundle.workflow.activities) {
    index.set(activity.name, activity);
  }
  return index;
}

export function diffVersions(from: BundleDoc, to: BundleDoc): ChangeSet {
  const before = activityIndex(from);
  const after = activityIndex(to);
  const added: string[] = [];
  const removed: string[] = [];
  const changed: string[] = [];
  const unchanged: string[] = [];
  for (const name of [...after.keys()].sort()) {
    if (!before.has(name)) {
      added.push(name);
    } else if (stableStringify(before.get(name)) === stableStringify(after.get(name))) {
      unchanged.push(name);
    } else {
      changed.push(name);
    }
  }
  for (const name of [...before.keys()].sort()) {
    if (!after.has(name)) removed.push(name);
  }
  return { added, removed, changed, unchanged };
}
