import { describe, expect, it } from "vitest";

import type { SchemaDoc } from "../src/api.js";
import { FormModel, boundaryDocument, fillForm } from "../src/form.js";

const REVIEW: SchemaDoc = {
  kind: "object",
  fields: {
    qty: { kind: "integer", min: 0, max: 100 },
    priority: { kind: "enum", values: ["low", "high"] },
  },
  required: ["qty"],
};

const MIXED: SchemaDoc = {
  kind: "object",
  fields: {
    label: { kind: "string", minLength: 2, maxLength: 5 },
    rate: { kind: "number", min: 0.5, max: 2.5 },
    urgent: { kind: "boolean" },
    meta: {
      kind: "object",
      fields: { note: { kind: "string", maxLength: 3 } },
      required: ["note"],
    },
    tags: { kind: "array", items: { kind: "enum", values: ["a", "b", "c"] } },
  },
  required: ["label", "rate", "meta"],
};

function codesAt(form: FormModel, path: string): string[] {
  return form
    .violations()
    .filter((v) => v.path === path)
    .map((v) => v.code)
    .sort();
}

describe("control generation", () => {
  it("mirrors numeric bounds onto the input element", () => {
    const form = new FormModel(REVIEW);
    const input = form.element.querySelector<HTMLInputElement>('[data-path="/qty"] input');
    expect(input).not.toBeNull();
    expect(input!.type).toBe("number");
    expect(input!.min).toBe("0");
    expect(input!.max).toBe("100");
    expect(input!.step).toBe("1");
  });

  it("mirrors string length bounds as attributes", () => {
    const form = new FormModel(MIXED);
    const input = form.element.querySelector<HTMLInputElement>('[data-path="/label"] input');
    expect(input!.getAttribute("minlength")).toBe("2");
    expect(input!.getAttribute("maxlength")).toBe("5");
  });

  it("renders enum fields as selects listing every allowed value", () => {
    const form = new FormModel(REVIEW);
    const select = form.element.querySelector<HTMLSelectElement>('[data-path="/priority"] select');
    const options = Array.from(select!.options).map((o) => o.value);
    expect(options).toEqual(["low", "high"]);
  });

  it("marks required fields and gives optional fields an include toggle", () => {
    const form = new FormModel(REVIEW);
    const qtyRow = form.element.querySelector('[data-path="/qty"]')!.parentElement!;
    expect(qtyRow.querySelector(".required-marker")).not.toBeNull();
    const toggle = form.element.querySelector<HTMLInputElement>(
      '[data-include-for="/priority"]',
    );
    expect(toggle).not.toBeNull();
    expect(toggle!.checked).toBe(false);
  });
});

describe("client-side constraint checks", () => {
  it("flags values above max and below min as RANGE", () => {
    const form = new FormModel(REVIEW);
    form.setValue("/qty", 200);
    expect(codesAt(form, "/qty")).toEqual(["RANGE"]);
    form.setValue("/qty", -1);
    expect(codesAt(form, "/qty")).toEqual(["RANGE"]);
    form.setValue("/qty", 100);
    expect(codesAt(form, "/qty")).toEqual([]);
    form.setValue("/qty", 0);
    expect(form.submittable()).toBe(true);
  });

  it("flags a fractional value in an integer field as TYPE_MISMATCH", () => {
    const form = new FormModel(REVIEW);
    form.setValue("/qty", 3.5);
    expect(codesAt(form, "/qty")).toEqual(["TYPE_MISMATCH"]);
  });

  it("flags a blank required numeric as REQUIRED_MISSING", () => {
    const form = new FormModel(REVIEW);
    expect(codesAt(form, "/qty")).toEqual(["REQUIRED_MISSING"]);
    expect(form.submittable()).toBe(false);
  });

  it("flags strings outside their length window as LENGTH", () => {
    const form = new FormModel(MIXED);
    form.setValue("/rate", 1);
    form.setValue("/meta/note", "ok");
    form.setValue("/label", "x");
    expect(codesAt(form, "/label")).toEqual(["LENGTH"]);
    form.setValue("/label", "toolong");
    expect(codesAt(form, "/label")).toEqual(["LENGTH"]);
    form.setValue("/label", "fine");
    expect(form.submittable()).toBe(true);
  });

  it("flags an out-of-list enum value as ENUM_VIOLATION", () => {
    const form = new FormModel(REVIEW);
    form.setValue("/qty", 5);
    form.setIncluded("/priority", true);
    const select = form.element.querySelector<HTMLSelectElement>('[data-path="/priority"] select')!;
    const rogue = select.ownerDocument.createElement("option");
    rogue.value = "nope";
    select.appendChild(rogue);
    select.value = "nope";
    expect(codesAt(form, "/priority")).toEqual(["ENUM_VIOLATION"]);
  });

  it("ignores violations inside excluded optional fields", () => {
    const form = new FormModel(MIXED);
    form.setValue("/label", "fine");
    form.setValue("/rate", 1);
    form.setValue("/meta/note", "ok");
    // urgent and tags stay off; their subtrees contribute nothing
    expect(form.submittable()).toBe(true);
  });
});

describe("serialization", () => {
  it("omits optional fields until their toggle is on", () => {
    const form = new FormModel(REVIEW);
    form.setValue("/qty", 7);
    expect(form.value()).toEqual({ qty: 7 });
    form.setIncluded("/priority", true);
    form.setValue("/priority", "high");
    expect(form.value()).toEqual({ qty: 7, priority: "high" });
    form.setIncluded("/priority", false);
    expect(form.value()).toEqual({ qty: 7 });
  });

  it("serializes nested groups and arrays", () => {
    const form = new FormModel(MIXED);
    form.setValue("/label", "abc");
    form.setValue("/rate", 2.5);
    form.setValue("/meta/note", "hi");
    form.setIncluded("/urgent", true);
    form.setValue("/urgent", true);
    form.setIncluded("/tags", true);
    const row0 = form.addRow("/tags");
    form.setValue(row0, "b");
    const row1 = form.addRow("/tags");
    form.setValue(row1, "c");
    expect(form.value()).toEqual({
      label: "abc",
      rate: 2.5,
      urgent: true,
      meta: { note: "hi" },
      tags: ["b", "c"],
    });
  });

  it("drops an array row when its remove button is clicked", () => {
    const form = new FormModel(MIXED);
    form.setIncluded("/tags", true);
    form.addRow("/tags");
    form.addRow("/tags");
    const firstRemove = form.element.querySelector<HTMLButtonElement>(".array-row .remove-row")!;
    firstRemove.click();
    // paths into arrays are positional: the surviving row is now row 0
    form.setValue("/tags/0", "a");
    expect((form.value() as { tags: string[] }).tags).toEqual(["a"]);
    expect(form.element.querySelectorAll(".array-row")).toHaveLength(1);
  });
});

describe("boundary documents", () => {
  it("builds the low extreme: minimums and first enum value", () => {
    expect(boundaryDocument(REVIEW, "low")).toEqual({ qty: 0, priority: "low" });
  });

  it("builds the high extreme: maximums and last enum value", () => {
    expect(boundaryDocument(REVIEW, "high")).toEqual({ qty: 100, priority: "high" });
  });

  it("covers nested objects, arrays, strings, and booleans", () => {
    expect(boundaryDocument(MIXED, "low")).toEqual({
      label: "xx",
      rate: 0.5,
      urgent: false,
      meta: { note: "" },
      tags: ["a"],
    });
    expect(boundaryDocument(MIXED, "high")).toEqual({
      label: "xxxxx",
      rate: 2.5,
      urgent: true,
      meta: { note: "xxx" },
      tags: ["c"],
    });
  });
});

describe("fillForm", () => {
  it("drives the form so value() round-trips the document", () => {
    for (const side of ["low", "high"] as const) {
      const doc = boundaryDocument(MIXED, side);
      const form = new FormModel(MIXED);
      fillForm(form, doc);
      expect(form.value()).toEqual(doc);
      expect(form.violations()).toEqual([]);
    }
  });
});

describe("server report rendering", () => {
  it("anchors each violation at its field and clears on demand", () => {
    const form = new FormModel(REVIEW);
    form.showServerReport([
      { path: "/qty", code: "RANGE", detail: "value 200 above max 100" },
      { path: "/priority", code: "ENUM_VIOLATION" },
    ]);
    const atQty = form.element.querySelector('[data-path="/qty"] [data-error-for="/qty"]');
    expect(atQty).not.toBeNull();
    expect(atQty!.textContent).toContain("RANGE");
    expect(atQty!.textContent).toContain("above max 100");
    expect(
      form.element.querySelector('[data-path="/priority"] [data-error-for="/priority"]'),
    ).not.toBeNull();
    form.clearErrors();
    expect(form.element.querySelectorAll(".server-error")).toHaveLength(0);
  });

  it("falls back to the root when the path matches no control", () => {
    const form = new FormModel(REVIEW);
    form.showServerReport([{ path: "/ghost", code: "UNKNOWN_FIELD" }]);
    const note = form.element.querySelector('[data-error-for="/ghost"]');
    expect(note).not.toBeNull();
  });
});
