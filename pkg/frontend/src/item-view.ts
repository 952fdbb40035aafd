/**
 * Item inspection: properties and collections, the workflow diagram with
 * live token badges, and the provenance view showing the full event
 * transcript plus the PROV export summary.
 */

import { Client, EventDoc, ItemDoc, ProvDoc } from "./api.js";
import { renderDiagram } from "./diagram.js";

export class ItemView {
  readonly element: HTMLElement;
  private readonly client: Client;
  private readonly doc: Document;
  private itemId: string | null = null;

  constructor(client: Client, doc: Document = document) {
    this.client = client;
    this.doc = doc;
    this.element = doc.createElement("section");
    this.element.className = "item-view";
  }

  async show(itemId: string): Promise<void> {
    this.itemId = itemId;
    await this.refreshNow();
  }

  async refreshNow(): Promise<void> {
    if (!this.itemId) return;
    const item = await this.client.getItem(this.itemId);
    const { events } = await this.client.events(this.itemId, { limit: 500 });
    const prov = await this.client.prov(this.itemId);
    this.element.textContent = "";
    this.element.appendChild(this.header(item));
    this.element.appendChild(this.propertyTable(item));
    const bundle = await this.client.getBundle(item.descriptionName, item.descriptionVersion);
    const diagramHost = this.doc.createElement("div");
    diagramHost.className = "diagram-host";
    diagramHost.appendChild(renderDiagram(bundle.workflow, item.marking, this.doc));
    this.element.appendChild(diagramHost);
    this.element.appendChild(this.provenance(events, prov));
  }

  private header(item: ItemDoc): HTMLElement {
    const head = this.doc.createElement("div");
    head.className = "item-head";
    head.textContent =
      `${item.name} [${item.descriptionName} v${item.descriptionVersion}] ` +
      `${item.finished ? "finished" : "running"} at seq ${item.lastEventSeq}`;
    head.setAttribute("data-version", String(item.descriptionVersion));
    head.setAttribute("data-finished", String(item.finished));
    return head;
  }

  private propertyTable(item: ItemDoc): HTMLElement {
    const table = this.doc.createElement("table");
    table.className = "property-table";
    for (const [name, value] of Object.entries(item.properties)) {
      const row = this.doc.createElement("tr");
      const key = this.doc.createElement("td");
      key.textContent = name;
      const cell = this.doc.createElement("td");
      cell.textContent = JSON.stringify(value);
      cell.setAttribute("data-property", name);
      row.appendChild(key);
      row.appendChild(cell);
      table.appendChild(row);
    }
    for (const [name, members] of Object.entries(item.collections)) {
      const row = this.doc.createElement("tr");
      const key = this.doc.createElement("td");
      key.textContent = `${name} (collection)`;
      const cell = this.doc.createElement("td");
      cell.textContent = members.join(", ");
      cell.setAttribute("data-collection", name);
      row.appendChild(key);
      row.appendChild(cell);
      table.appendChild(row);
    }
    return table;
  }

  private provenance(events: EventDoc[], prov: ProvDoc): HTMLElement {
    const wrap = this.doc.createElement("div");
    wrap.className = "provenance-view";

    const summary = this.doc.createElement("div");
    summary.className = "prov-summary";
    const sections: [string, unknown][] = [
      ["entity", prov.entity],
      ["activity", prov.activity],
      ["agent", prov.agent],
      ["wasGeneratedBy", prov.wasGeneratedBy],
      ["used", prov.used],
    ];
    const counts = sections
      .map(([key, section]) => {
        const size = Array.isArray(section)
          ? section.length
          : Object.keys((section as Record<string, unknown>) ?? {}).length;
        return `${key}: ${size}`;
      })
      .join("  ");
    summary.textContent = counts;
    wrap.appendChild(summary);

    const table = this.doc.createElement("table");
    table.className = "event-table";
    for (const event of events) {
      const row = this.doc.createElement("tr");
      row.className = "event-row";
      row.setAttribute("data-what", event.what);
      row.setAttribute("data-seq", String(event.seq));
      for (const text of [
        String(event.seq),
        event.when,
        event.what,
        event.who,
        event.how,
        event.why ?? "",
      ]) {
        const cell = this.doc.createElement("td");
        cell.textContent = text;
        row.appendChild(cell);
      }
      table.appendChild(row);
    }
    wrap.appendChild(table);
    return wrap;
  }

  /** The `what` of the latest transcript row, for scripted assertions. */
  latestEventWhat(): string | null {
    const rows = this.element.querySelectorAll(".event-row");
    const last = rows[rows.length - 1];
    return last ? last.getAttribute("data-what") : null;
  }
}
