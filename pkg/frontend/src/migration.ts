/**
 * Migration panel: offers only newer versions, shows the activity-level
 * change set, runs the server's check, opens a remap editor when the
 * check reports an orphaned token, and applies the agreed plan. A
 * STALE_PLAN answer re-checks automatically so the operator never holds
 * a dead plan.
 */

import { ApiError, Client, PlanDoc } from "./api.js";
import { diffVersions } from "./diff.js";

export class MigrationPanel {
  readonly element: HTMLElement;
  private readonly client: Client;
  private readonly doc: Document;
  private itemId: string | null = null;
  private agent: string | null = null;
  private plan: PlanDoc | null = null;
  private remap: Record<string, string> = {};
  private toVersion: number | null = null;
  onApplied: ((itemId: string) => void) | null = null;

  private readonly versionHost: HTMLElement;
  private readonly diffHost: HTMLElement;
  private readonly planHost: HTMLElement;
  private readonly remapHost: HTMLElement;
  private readonly noticeHost: HTMLElement;

  constructor(client: Client, doc: Document = document) {
    this.client = client;
    this.doc = doc;
    this.element = doc.createElement("section");
    this.element.className = "migration-panel";
    this.versionHost = this.section("migration-versions");
    this.diffHost = this.section("migration-diff");
    this.remapHost = this.section("migration-remap");
    this.planHost = this.section("migration-plan");
    this.noticeHost = this.section("migration-notice");
  }

  private section(cls: string): HTMLElement {
    const host = this.doc.createElement("div");
    host.className = cls;
    this.element.appendChild(host);
    return host;
  }

  private notice(text: string): void {
    this.noticeHost.textContent = text;
  }

  async show(itemId: string, agent: string): Promise<void> {
    this.itemId = itemId;
    this.agent = agent;
    this.plan = null;
    this.remap = {};
    this.toVersion = null;
    this.diffHost.textContent = "";
    this.planHost.textContent = "";
    this.remapHost.textContent = "";
    this.notice("");
    const item = await this.client.getItem(itemId);
    const listing = await this.client.getDescription(item.descriptionName);
    const newer = listing.versions.filter((v) => v > item.descriptionVersion);
    this.versionHost.textContent = "";
    const label = this.doc.createElement("span");
    label.textContent = `on ${item.descriptionName} v${item.descriptionVersion}; migrate to: `;
    this.versionHost.appendChild(label);
    if (newer.length === 0) {
      this.versionHost.appendChild(this.doc.createTextNode("no newer version published"));
      return;
    }
    for (const version of newer) {
      const button = this.doc.createElement("button");
      button.type = "button";
      button.className = "target-version";
      button.setAttribute("data-version", String(version));
      button.textContent = `v${version}`;
      button.addEventListener("click", () => {
        void this.pick(version);
      });
      this.versionHost.appendChild(button);
    }
  }

  async pick(version: number): Promise<void> {
    if (!this.itemId) return;
    this.toVersion = version;
    this.plan = null;
    this.remap = {};
    this.planHost.textContent = "";
    this.remapHost.textContent = "";
    const item = await this.client.getItem(this.itemId);
    const from = await this.client.getBundle(item.descriptionName, item.descriptionVersion);
    const to = await this.client.getBundle(item.descriptionName, version);
    const changes = diffVersions(from, to);
    this.diffHost.textContent = "";
    for (const [kind, names] of Object.entries(changes)) {
      if (names.length === 0) continue;
      const line = this.doc.createElement("div");
      line.className = `diff-${kind}`;
      line.textContent = `${kind}: ${names.join(", ")}`;
      this.diffHost.appendChild(line);
    }
    await this.check();
  }

  async check(): Promise<void> {
    if (!this.itemId || this.toVersion === null) return;
    this.notice("");
    try {
      const remap = Object.fromEntries(
        Object.entries(this.remap).filter(([, target]) => target !== ""),
      );
      this.plan = await this.client.migrateCheck(this.itemId, this.toVersion, remap);
    } catch (error) {
      if (error instanceof ApiError && error.code === "MIGRATION_ORPHAN") {
        const activity = String(error.detail?.["activity"] ?? "");
        if (!(activity in this.remap)) this.remap[activity] = "";
        this.renderRemapEditor();
        this.notice(`orphaned token on ${activity}; map it to a target activity`);
        return;
      }
      this.notice(error instanceof ApiError ? `${error.code}: ${error.message}` : String(error));
      return;
    }
    this.renderPlan();
  }

  private renderRemapEditor(): void {
    this.planHost.textContent = "";
    this.remapHost.textContent = "";
    const title = this.doc.createElement("div");
    title.textContent = "remap orphaned activities:";
    this.remapHost.appendChild(title);
    for (const [activity, target] of Object.entries(this.remap)) {
      const row = this.doc.createElement("div");
      row.className = "remap-row";
      const label = this.doc.createElement("label");
      label.textContent = `${activity} -> `;
      const input = this.doc.createElement("input");
      input.type = "text";
      input.value = target;
      input.setAttribute("data-remap-for", activity);
      input.addEventListener("input", () => {
        this.remap[activity] = input.value;
      });
      row.appendChild(label);
      row.appendChild(input);
      this.remapHost.appendChild(row);
    }
    const again = this.doc.createElement("button");
    again.type = "button";
    again.className = "re-check";
    again.textContent = "re-check";
    again.addEventListener("click", () => {
      void this.check();
    });
    this.remapHost.appendChild(again);
  }

  /** Scripted remap entry, mirroring typing into the editor input. */
  setRemap(activity: string, target: string): void {
    this.remap[activity] = target;
    const input = this.remapHost.querySelector(`input[data-remap-for="${activity}"]`);
    if (input instanceof HTMLInputElement) input.value = target;
  }

  private renderPlan(): void {
    this.remapHost.textContent = "";
    this.planHost.textContent = "";
    if (!this.plan) return;
    const summary = this.doc.createElement("div");
    summary.className = "plan-summary";
    summary.textContent =
      `plan: v${this.plan.fromVersion} -> v${this.plan.toVersion}, ` +
      `${Object.keys(this.plan.tokenMap).length} token mappings`;
    this.planHost.appendChild(summary);
    for (const note of this.plan.notes) {
      const line = this.doc.createElement("div");
      line.className = "plan-note";
      line.textContent = note;
      this.planHost.appendChild(line);
    }
    const apply = this.doc.createElement("button");
    apply.type = "button";
    apply.className = "apply-plan";
    apply.textContent = "apply migration";
    apply.addEventListener("click", () => {
      void this.apply();
    });
    this.planHost.appendChild(apply);
  }

  currentPlan(): PlanDoc | null {
    return this.plan;
  }

  async apply(): Promise<void> {
    if (!this.itemId || !this.agent || !this.plan) return;
    try {
      await this.client.migrateApply(this.itemId, this.plan, this.agent, "console migration");
    } catch (error) {
      if (error instanceof ApiError && error.code === "STALE_PLAN") {
        // the item moved since the check; get a fresh plan and say so
        this.plan = null;
        await this.check();
        const followUp = this.noticeHost.textContent;
        this.notice(
          followUp
            ? `plan went stale; ${followUp}`
            : "plan went stale; re-checked against the item's current state",
        );
        return;
      }
      this.notice(error instanceof ApiError ? `${error.code}: ${error.message}` : String(error));
      return;
    }
    this.notice(`migrated to v${this.plan.toVersion}`);
    this.plan = null;
    this.planHost.textContent = "";
    if (this.onApplied && this.itemId) this.onApplied(this.itemId);
  }
}
