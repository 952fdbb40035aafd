import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import { Client, type BundleDoc } from "../src/api.js";

const PYTHON = process.env.DDFLOW_PYTHON ?? "python3";
const REPO_ROOT = join(dirname(fileURLToPath(import.meta.url)), "..", "..");

export interface TestServer {
  client: Client;
  baseUrl: string;
  storeDir: string;
  stop(): Promise<void>;
}

function cli(storeDir: string, ...args: string[]): void {
  const result = spawnSync(PYTHON, ["-m", "ddflow.cli", "--store", storeDir, ...args], {
    cwd: REPO_ROOT,
    encoding: "utf8",
  });
  if (result.status !== 0) {
    throw new Error(
      `cli ${args.join(" ")} failed (${result.status}): ${result.stderr || result.stdout}`,
    );
  }
}

function waitForListening(proc: ChildProcess): Promise<string> {
  return new Promise((resolve, reject) => {
    let stderr = "";
    const timer = setTimeout(() => {
      reject(new Error(`server did not report listening: ${stderr}`));
    }, 15000);
    const onData = (chunk: Buffer) => {
      stderr += chunk.toString();
      const match = stderr.match(/listening on ([\d.]+):(\d+)/);
      if (match) {
        clearTimeout(timer);
        proc.stderr?.off("data", onData);
        resolve(`http://${match[1]}:${match[2]}`);
      }
    };
    proc.stderr?.on("data", onData);
    proc.once("exit", (code) => {
      clearTimeout(timer);
      reject(new Error(`server exited before listening (code ${code}): ${stderr}`));
    });
  });
}

/**
 * Start a real ddflow server on an ephemeral port with a fresh store.
 * Agents alice (op, qa) and bob (op) are seeded through the CLI before
 * the server starts, since the HTTP surface has no agent-creation endpoint.
 */
export async function startServer(): Promise<TestServer> {
  const storeDir = mkdtempSync(join(tmpdir(), "ddflow-console-"));
  cli(storeDir, "add-agent", "--id", "alice", "--name", "Alice", "--roles", "op,qa");
  cli(storeDir, "add-agent", "--id", "bob", "--name", "Bob", "--roles", "op");
  cli(storeDir, "add-agent", "--id", "carol", "--name", "Carol", "--roles", "viewer");

  const proc = spawn(
    PYTHON,
    ["-m", "ddflow.cli", "--store", storeDir, "serve", "--bind", "127.0.0.1:0"],
    { cwd: REPO_ROOT, stdio: ["ignore", "ignore", "pipe"] },
  );
  const baseUrl = await waitForListening(proc);

  // One round-trip to confirm the server answers before tests begin.
  const client = new Client(baseUrl);
  await client.listAgents();

  return {
    client,
    baseUrl,
    storeDir,
    stop(): Promise<void> {
      return new Promise((resolve) => {
        const hammer = setTimeout(() => proc.kill("SIGKILL"), 3000);
        proc.once("exit", () => {
          clearTimeout(hammer);
          rmSync(storeDir, { recursive: true, force: true });
          resolve();
        });
        proc.kill("SIGTERM");
      });
    },
  };
}

// The Order fixture family: v2 adds Pack after Approve, v3 renames Approve
// to Recheck, so an item resting on Approve has no image in v3.

const ORDER_BASE = {
  name: "Order",
  properties: [
    { name: "total", type: "number", initial: 0, mutable: true },
    { name: "status", type: "string", initial: "new", mutable: true },
    { name: "sku", type: "string", initial: "unset", mutable: false },
  ],
  collections: [],
  schemas: {
    review: {
      kind: "object",
      fields: {
        qty: { kind: "integer", min: 0, max: 100 },
        priority: { kind: "enum", values: ["low", "high"] },
      },
      required: ["qty"],
    },
    approve: {
      kind: "object",
      fields: { ok: { kind: "boolean" } },
      required: ["ok"],
    },
    pack: {
      kind: "object",
      fields: { boxes: { kind: "integer", min: 1 } },
      required: ["boxes"],
    },
  },
  scripts: {
    tallyReview: 'set total = outcome.qty * 2; set status = "reviewed"',
  },
};

const REVIEW = {
  name: "Review",
  kind: "elementary",
  role: "op",
  schemaRef: "review",
  consequence: "tallyReview",
};
const APPROVE = { name: "Approve", kind: "elementary", role: "qa", schemaRef: "approve" };
const PACK = { name: "Pack", kind: "elementary", role: "op", schemaRef: "pack" };
const RECHECK = { ...APPROVE, name: "Recheck" };

export function orderBundle(version: 1 | 2 | 3): BundleDoc {
  const doc = JSON.parse(JSON.stringify(ORDER_BASE));
  if (version === 1) {
    doc.workflow = {
      activities: [REVIEW, APPROVE],
      edges: [
        ["Start", "Review"],
        ["Review", "Approve"],
        ["Approve", "End"],
      ],
    };
  } else if (version === 2) {
    doc.workflow = {
      activities: [REVIEW, APPROVE, PACK],
      edges: [
        ["Start", "Review"],
        ["Review", "Approve"],
        ["Approve", "Pack"],
        ["Pack", "End"],
      ],
    };
  } else {
    doc.workflow = {
      activities: [REVIEW, RECHECK, PACK],
      edges: [
        ["Start", "Review"],
        ["Review", "Recheck"],
        ["Recheck", "Pack"],
        ["Pack", "End"],
      ],
    };
  }
  return doc as BundleDoc;
}

export const ORDER_OUTCOMES: Record<string, Record<string, unknown>> = {
  Review: { qty: 7, priority: "high" },
  Approve: { ok: true },
  Recheck: { ok: true },
  Pack: { boxes: 2 },
};

export function localActivity(qualified: string): string {
  const idx = qualified.lastIndexOf("/");
  return idx === -1 ? qualified : qualified.slice(idx + 1);
}

/** Wait until `predicate` returns a truthy value, polling every `stepMs`. */
export async function until<T>(
  predicate: () => T | Promise<T>,
  { timeoutMs = 10000, stepMs = 50, label = "condition" } = {},
): Promise<NonNullable<T>> {
  const deadline = Date.now() + timeoutMs;
  for (;;) {
    const value = await predicate();
    if (value) return value as NonNullable<T>;
    if (Date.now() > deadline) throw new Error(`timed out waiting for ${label}`);
    await new Promise((r) => setTimeout(r, stepMs));
  }
}
