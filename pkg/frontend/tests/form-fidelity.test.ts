/**
 * Round-trip fidelity between generated forms and server validation:
 * forms filled at the low and high boundary of every fixture schema
 * must serialize to outcomes the server accepts, and a value outside
 * the schema's range must be stopped before any request is made.
 */

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { Client, type JobDoc } from "../src/api.js";
import { FormModel, boundaryDocument, fillForm } from "../src/form.js";
import { InboxView } from "../src/inbox.js";
import {
  ORDER_OUTCOMES,
  localActivity,
  orderBundle,
  startServer,
  until,
  type TestServer,
} from "./helpers.js";

let server: TestServer;
let itemCounter = 0;

beforeAll(async () => {
  server = await startServer();
  await server.client.registerBundle(orderBundle(1), "alice", "fixture v1");
  await server.client.registerBundle(orderBundle(2), "alice", "fixture v2 adds Pack");
});

afterAll(async () => {
  await server.stop();
});

/** Create an item and execute jobs until one with the wanted schema is open. */
async function itemAtSchema(
  version: 1 | 2,
  schemaName: string,
): Promise<{ itemId: string; job: JobDoc }> {
  const client = server.client;
  const item = await client.createItem("Order", version, `fx-${++itemCounter}`, {}, "alice");
  for (let step = 0; step < 10; step += 1) {
    const { jobs } = await client.listJobs(item.id, "alice");
    expect(jobs.length).toBeGreaterThan(0);
    const job = jobs[0]!;
    if (job.schemaRef === schemaName) return { itemId: item.id, job };
    const outcome = ORDER_OUTCOMES[localActivity(job.activity)];
    await client.executeJob(item.id, job.jobId, outcome, "alice");
  }
  throw new Error(`never reached a job with schema ${schemaName}`);
}

describe("boundary fills pass server validation", () => {
  const cases: { schemaName: string; version: 1 | 2 }[] = [
    { schemaName: "review", version: 1 },
    { schemaName: "approve", version: 1 },
    { schemaName: "pack", version: 2 },
  ];

  for (const { schemaName, version } of cases) {
    for (const side of ["low", "high"] as const) {
      it(`${schemaName} at its ${side} extreme`, async () => {
        const bundle = await server.client.getBundle("Order", version);
        const schema = bundle.schemas[schemaName];
        expect(schema).toBeDefined();

        const { itemId, job } = await itemAtSchema(version, schemaName);
        const form = new FormModel(schema!);
        const boundary = boundaryDocument(schema!, side);
        fillForm(form, boundary);

        expect(form.violations()).toEqual([]);
        expect(form.value()).toEqual(boundary);

        // The serialized form posts cleanly: any validation failure
        // would surface as a thrown 422 here.
        const after = await server.client.executeJob(itemId, job.jobId, form.value(), "alice");
        expect(after.kind).toBe("item");
        expect(after.lastEventSeq).toBeGreaterThan(1);
      });
    }
  }
});

describe("out-of-range values are blocked client-side", () => {
  it("a too-large value never reaches the wire and the job stays open", async () => {
    const { itemId, job } = await itemAtSchema(1, "review");

    const wire: { method: string; url: string }[] = [];
    const counting = new Client(server.baseUrl, (input, init) => {
      wire.push({ method: init?.method ?? "GET", url: input });
      return fetch(input, init);
    });

    const inbox = new InboxView(counting, document, 0);
    try {
      inbox.setAgent("alice");
      await inbox.refreshNow();

      const row = inbox.element.querySelector<HTMLElement>(`[data-job="${job.jobId}"]`);
      expect(row).not.toBeNull();
      row!.querySelector<HTMLButtonElement>(".open-job")!.click();
      await until(() => inbox.openedForm(), { label: "job form to open" });

      const form = inbox.openedForm()!;
      form.setValue("/qty", 200); // schema max is 100
      expect(form.submittable()).toBe(false);

      const postsBefore = wire.filter((c) => c.method === "POST").length;
      row!.querySelector<HTMLButtonElement>(".complete-job")!.click();
      const errors = await until(
        () => row!.querySelector(".form-errors")?.textContent || null,
        { label: "client-side error text" },
      );
      expect(errors).toContain("/qty: RANGE");

      // nothing was posted, and the server still offers the job
      expect(wire.filter((c) => c.method === "POST")).toHaveLength(postsBefore);
      const { jobs } = await server.client.listJobs(itemId, "alice");
      expect(jobs.map((j) => j.jobId)).toContain(job.jobId);
    } finally {
      inbox.dispose();
    }
  });

  it("a value below an open-ended minimum is caught the same way", async () => {
    const bundle = await server.client.getBundle("Order", 2);
    const form = new FormModel(bundle.schemas["pack"]!);
    form.setValue("/boxes", 0); // schema min is 1, no max
    const codes = form.violations().map((v) => v.code);
    expect(codes).toContain("RANGE");
    expect(form.submittable()).toBe(false);
  });
});
