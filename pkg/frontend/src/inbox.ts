/**
 * Agent-scoped job inbox. Polls the server every two seconds, renders
 * one row per runnable job, and opens a schema-generated form to
 * complete a job. Completion refreshes the inbox in place; races show
 * up as a 409 notice and a refresh, never as a stuck row.
 */

import { ApiError, Client, ItemSummary, JobDoc } from "./api.js";
import { FormModel } from "./form.js";

export const DEFAULT_POLL_MS = 2000;

interface OpenForm {
  job: JobDoc;
  form: FormModel;
  host: HTMLElement;
}

export class InboxView {
  readonly element: HTMLElement;
  agent: string | null = null;
  private readonly client: Client;
  private readonly doc: Document;
  private readonly listHost: HTMLElement;
  private readonly noticeHost: HTMLElement;
  private timer: ReturnType<typeof setInterval> | null = null;
  private open: OpenForm | null = null;
  private refreshing: Promise<void> | null = null;
  onCompleted: ((item: string) => void) | null = null;

  constructor(client: Client, doc: Document = document, pollMs: number = DEFAULT_POLL_MS) {
    this.client = client;
    this.doc = doc;
    this.element = doc.createElement("section");
    this.element.className = "inbox";
    this.noticeHost = doc.createElement("div");
    this.noticeHost.className = "inbox-notice";
    this.listHost = doc.createElement("div");
    this.listHost.className = "inbox-list";
    this.element.appendChild(this.noticeHost);
    this.element.appendChild(this.listHost);
    if (pollMs > 0) {
      this.timer = setInterval(() => {
        void this.refreshNow();
      }, pollMs);
    }
  }

  dispose(): void {
    if (this.timer !== null) clearInterval(this.timer);
    this.timer = null;
  }

  setAgent(agent: string | null): void {
    this.agent = agent;
    this.open = null;
    void this.refreshNow();
  }

  /** One full fetch-and-render pass; awaited by tests for determinism. */
  refreshNow(): Promise<void> {
    if (this.refreshing) return this.refreshing;
    this.refreshing = this.refresh().finally(() => {
      this.refreshing = null;
    });
    return this.refreshing;
  }

  private notice(text: string): void {
    this.noticeHost.textContent = text;
  }

  private async refresh(): Promise<void> {
    if (!this.agent) {
      this.listHost.textContent = "";
      this.notice("select an agent to see runnable jobs");
      return;
    }
    let rows: { item: ItemSummary; job: JobDoc }[];
    try {
      rows = await this.collect(this.agent);
    } catch (error) {
      this.notice(error instanceof ApiError ? `${error.code}: ${error.message}` : String(error));
      return;
    }
    this.render(rows);
  }

  private async collect(agent: string): Promise<{ item: ItemSummary; job: JobDoc }[]> {
    const rows: { item: ItemSummary; job: JobDoc }[] = [];
    const items = await this.client.listItems();
    for (const item of items) {
      if (item.kind !== "item" || item.finished) continue;
      const { jobs } = await this.client.listJobs(item.id, agent);
      for (const job of jobs) rows.push({ item, job });
    }
    return rows;
  }

  private render(rows: { item: ItemSummary; job: JobDoc }[]): void {
    this.listHost.textContent = "";
    if (rows.length === 0) {
      this.notice(`no runnable jobs for ${this.agent}; the inbox refreshes automatically`);
      return;
    }
    this.notice("");
    for (const { item, job } of rows) {
      const row = this.doc.createElement("div");
      row.className = "job-row";
      row.setAttribute("data-job", job.jobId);
      const title = this.doc.createElement("span");
      title.className = "job-title";
      title.textContent = `${job.activity} on ${item.name} (role ${job.requiredRole})`;
      row.appendChild(title);
      const openButton = this.doc.createElement("button");
      openButton.type = "button";
      openButton.className = "open-job";
      openButton.textContent = "open";
      openButton.addEventListener("click", () => {
        void this.openJob(item, job, row);
      });
      row.appendChild(openButton);
      this.listHost.appendChild(row);
      if (this.open && this.open.job.jobId === job.jobId) {
        row.appendChild(this.open.host);
      }
    }
  }

  async openJob(item: ItemSummary, job: JobDoc, row: HTMLElement): Promise<void> {
    const bundle = await this.client.getBundle(item.descriptionName, item.descriptionVersion);
    const schema = bundle.schemas[job.schemaRef];
    if (!schema) {
      this.notice(`no schema ${job.schemaRef} in ${item.descriptionName}`);
      return;
    }
    const host = this.doc.createElement("div");
    host.className = "job-form";
    const form = new FormModel(schema, this.doc);
    form.mount(host);
    const errorHost = this.doc.createElement("div");
    errorHost.className = "form-errors";
    host.appendChild(errorHost);
    const complete = this.doc.createElement("button");
    complete.type = "button";
    complete.className = "complete-job";
    complete.textContent = "complete";
    complete.addEventListener("click", () => {
      void this.complete(job, form, errorHost);
    });
    host.appendChild(complete);
    this.open = { job, form, host };
    row.appendChild(host);
  }

  /** The open form, for scripted tests. */
  openedForm(): FormModel | null {
    return this.open ? this.open.form : null;
  }

  async complete(job: JobDoc, form: FormModel, errorHost: HTMLElement): Promise<void> {
    errorHost.textContent = "";
    const clientSide = form.violations();
    if (clientSide.length > 0) {
      // constraint failures never reach the wire
      errorHost.textContent = clientSide
        .map((violation) => `${violation.path}: ${violation.code} (${violation.message})`)
        .join("; ");
      return;
    }
    if (!this.agent) return;
    try {
      await this.client.executeJob(job.itemId, job.jobId, form.value(), this.agent);
    } catch (error) {
      if (error instanceof ApiError && error.status === 422) {
        form.showServerReport(error.violations());
        errorHost.textContent = `${error.code}: ${error.message}`;
        return;
      }
      if (error instanceof ApiError && error.status === 409) {
        this.open = null;
        await this.refreshNow();
        // set after the refresh so the re-render cannot wipe the note;
        // the next poll clears it
        this.notice("job no longer available; refreshing");
        return;
      }
      if (error instanceof ApiError) {
        errorHost.textContent = `${error.code}: ${error.message}`;
        return;
      }
      throw error;
    }
    this.open = null;
    if (this.onCompleted) this.onCompleted(job.itemId);
    await this.refreshNow();
  }
}
