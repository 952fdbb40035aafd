/**
 * Console shell: agent picker, inbox, item inspection, and the
 * migration panel, wired over one shared client. All state transitions
 * go through the documented server endpoints.
 */

import { Client } from "./api.js";
import { DEFAULT_POLL_MS, InboxView } from "./inbox.js";
import { ItemView } from "./item-view.js";
import { MigrationPanel } from "./migration.js";

export interface Console {
  inbox: InboxView;
  itemView: ItemView;
  migration: MigrationPanel;
  selectAgent(agent: string): Promise<void>;
  openItem(itemId: string): Promise<void>;
  openMigration(itemId: string): Promise<void>;
  dispose(): void;
}

export async function mountConsole(
  root: HTMLElement,
  client: Client,
  pollMs: number = DEFAULT_POLL_MS,
): Promise<Console> {
  const doc = root.ownerDocument;
  root.textContent = "";

  const bar = doc.createElement("header");
  bar.className = "top-bar";
  const agentLabel = doc.createElement("label");
  agentLabel.textContent = "agent: ";
  const agentSelect = doc.createElement("select");
  agentSelect.className = "agent-select";
  const blank = doc.createElement("option");
  blank.value = "";
  blank.textContent = "(pick an agent)";
  agentSelect.appendChild(blank);
  const { agents } = await client.listAgents();
  for (const agent of agents) {
    const option = doc.createElement("option");
    option.value = agent.id;
    option.textContent = `${agent.displayName} [${agent.roles.join(", ")}]`;
    agentSelect.appendChild(option);
  }
  agentLabel.appendChild(agentSelect);
  bar.appendChild(agentLabel);
  root.appendChild(bar);

  const main = doc.createElement("main");
  main.className = "console-main";
  root.appendChild(main);

  const inbox = new InboxView(client, doc, pollMs);
  const itemView = new ItemView(client, doc);
  const migration = new MigrationPanel(client, doc);
  main.appendChild(inbox.element);
  main.appendChild(itemView.element);
  main.appendChild(migration.element);

  const console_: Console = {
    inbox,
    itemView,
    migration,
    async selectAgent(agent: string): Promise<void> {
      agentSelect.value = agent;
      inbox.setAgent(agent || null);
      await inbox.refreshNow();
    },
    async openItem(itemId: string): Promise<void> {
      await itemView.show(itemId);
    },
    async openMigration(itemId: string): Promise<void> {
      const agent = agentSelect.value || "";
      await migration.show(itemId, agent);
    },
    dispose(): void {
      inbox.dispose();
    },
  };

  agentSelect.addEventListener("change", () => {
    inbox.setAgent(agentSelect.value || null);
  });
  inbox.onCompleted = (itemId) => {
    void itemView.show(itemId).catch(() => undefined);
  };
  migration.onApplied = (itemId) => {
    void itemView.show(itemId).catch(() => undefined);
    void inbox.refreshNow();
  };
  return console_;
}
