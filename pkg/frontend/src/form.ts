/**
 * Schema-driven outcome forms. A FormModel mirrors every constraint of
 * the outcome schema client-side, so a form that passes its own checks
 * serializes to a document the server accepts, and an out-of-range value
 * never reaches the wire.
 */

import type { FieldSpec, SchemaDoc, Violation } from "./api.js";

export interface ClientViolation {
  path: string;
  code: string;
  message: string;
}

interface BaseControl {
  path: string;
  spec: FieldSpec;
  root: HTMLElement;
}

interface ScalarControl extends BaseControl {
  kind: "string" | "integer" | "number";
  input: HTMLInputElement;
}

interface BoolControl extends BaseControl {
  kind: "boolean";
  input: HTMLInputElement;
}

interface EnumControl extends BaseControl {
  kind: "enum";
  select: HTMLSelectElement;
}

interface GroupControl extends BaseControl {
  kind: "object";
  children: Map<string, Control>;
  includes: Map<string, HTMLInputElement>;
}

interface ArrayControl extends BaseControl {
  kind: "array";
  rows: Control[];
  rowHost: HTMLElement;
}

type Control = ScalarControl | BoolControl | EnumControl | GroupControl | ArrayControl;

const MISSING = Symbol("missing");

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  cls?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  if (cls) node.className = cls;
  if (text !== undefined) node.textContent = text;
  return node;
}

export class FormModel {
  private readonly doc: Document;
  private readonly rootControl: GroupControl;
  readonly element: HTMLElement;

  constructor(schema: SchemaDoc, doc: Document = document) {
    this.doc = doc;
    this.element = el(doc, "div", "form-model");
    this.rootControl = this.buildGroup("", schema as FieldSpec);
    this.element.appendChild(this.rootControl.root);
  }

  mount(container: HTMLElement): void {
    container.appendChild(this.element);
  }

  /** Serialized outcome document from every included control. */
  value(): Record<string, unknown> {
    const out = this.read(this.rootControl);
    return out === MISSING ? {} : (out as Record<string, unknown>);
  }

  /** Client-side constraint check, one entry per violated field. */
  violations(): ClientViolation[] {
    const found: ClientViolation[] = [];
    this.check(this.rootControl, found);
    return found;
  }

  submittable(): boolean {
    return this.violations().length === 0;
  }

  /** Scriptable fill: sets the control at a server-style path. */
  setValue(path: string, value: unknown): void {
    const control = this.find(path);
    if (!control) throw new Error(`no control at ${path || "/"}`);
    switch (control.kind) {
      case "string":
        control.input.value = String(value);
        break;
      case "integer":
      case "number":
        control.input.value = value === null || value === undefined ? "" : String(value);
        break;
      case "boolean":
        control.input.checked = Boolean(value);
        break;
      case "enum":
        control.select.value = String(value);
        break;
      default:
        throw new Error(`cannot set composite control at ${path}`);
    }
  }

  /** Turns an optional field on or off by its path. */
  setIncluded(path: string, included: boolean): void {
    const slash = path.lastIndexOf("/");
    const parentPath = path.slice(0, slash);
    const name = path.slice(slash + 1);
    const parent = this.find(parentPath);
    if (!parent || parent.kind !== "object") throw new Error(`no group at ${parentPath || "/"}`);
    const toggle = parent.includes.get(name);
    if (!toggle) throw new Error(`${path} is required, not toggleable`);
    toggle.checked = included;
  }

  /** Appends a row to the array at path and returns the new row's path. */
  addRow(path: string): string {
    const control = this.find(path);
    if (!control || control.kind !== "array") throw new Error(`no array at ${path || "/"}`);
    const spec = control.spec.items;
    if (!spec) throw new Error(`array at ${path} lacks an item spec`);
    const index = control.rows.length;
    const row = this.build(`${path}/${index}`, spec);
    control.rows.push(row);
    const wrap = el(this.doc, "div", "array-row");
    const remove = el(this.doc, "button", "remove-row", "remove");
    remove.type = "button";
    remove.addEventListener("click", () => {
      control.rows.splice(control.rows.indexOf(row), 1);
      wrap.remove();
    });
    wrap.appendChild(row.root);
    wrap.appendChild(remove);
    control.rowHost.appendChild(wrap);
    return `${path}/${index}`;
  }

  /** Renders a server validation report inline at the offending fields. */
  showServerReport(violations: Violation[]): void {
    this.clearErrors();
    for (const violation of violations) {
      const control = this.find(violation.path);
      const target = control ?? this.rootControl;
      const note = el(
        this.doc,
        "span",
        "server-error",
        `${violation.code}${violation.detail ? `: ${violation.detail}` : ""}`,
      );
      note.setAttribute("data-error-for", violation.path);
      target.root.appendChild(note);
    }
  }

  clearErrors(): void {
    for (const note of Array.from(this.element.querySelectorAll(".server-error"))) {
      note.remove();
    }
  }

  // -- construction --

  private build(path: string, spec: FieldSpec): Control {
    switch (spec.kind) {
      case "object":
        return this.buildGroup(path, spec);
      case "array":
        return this.buildArray(path, spec);
      case "boolean":
        return this.buildBool(path, spec);
      case "enum":
        return this.buildEnum(path, spec);
      default:
        return this.buildScalar(path, spec);
    }
  }

  private labelled(path: string, spec: FieldSpec): HTMLElement {
    const wrap = el(this.doc, "div", "field");
    wrap.setAttribute("data-path", path);
    const name = path.slice(path.lastIndexOf("/") + 1) || "outcome";
    wrap.appendChild(el(this.doc, "label", "field-label", `${name} (${spec.kind})`));
    return wrap;
  }

  private buildScalar(path: string, spec: FieldSpec): ScalarControl {
    const wrap = this.labelled(path, spec);
    const input = el(this.doc, "input") as HTMLInputElement;
    if (spec.kind === "string") {
      input.type = "text";
      if (spec.minLength !== undefined) input.setAttribute("minlength", String(spec.minLength));
      if (spec.maxLength !== undefined) input.setAttribute("maxlength", String(spec.maxLength));
    } else {
      input.type = "number";
      if (spec.kind === "integer") input.step = "1";
      if (spec.min !== undefined) input.min = String(spec.min);
      if (spec.max !== undefined) input.max = String(spec.max);
    }
    wrap.appendChild(input);
    return { kind: spec.kind as ScalarControl["kind"], path, spec, root: wrap, input };
  }

  private buildBool(path: string, spec: FieldSpec): BoolControl {
    const wrap = this.labelled(path, spec);
    const input = el(this.doc, "input") as HTMLInputElement;
    input.type = "checkbox";
    wrap.appendChild(input);
    return { kind: "boolean", path, spec, root: wrap, input };
  }

  private buildEnum(path: string, spec: FieldSpec): EnumControl {
    const wrap = this.labelled(path, spec);
    const select = el(this.doc, "select") as HTMLSelectElement;
    for (const value of spec.values ?? []) {
      const option = el(this.doc, "option", undefined, value) as HTMLOptionElement;
      option.value = value;
      select.appendChild(option);
    }
    wrap.appendChild(select);
    return { kind: "enum", path, spec, root: wrap, select };
  }

  private buildGroup(path: string, spec: FieldSpec): GroupControl {
    const wrap = this.labelled(path, spec);
    wrap.classList.add("group");
    const children = new Map<string, Control>();
    const includes = new Map<string, HTMLInputElement>();
    const required = new Set(spec.required ?? []);
    for (const [name, inner] of Object.entries(spec.fields ?? {})) {
      const row = el(this.doc, "div", "group-row");
      if (!required.has(name)) {
        // optional fields serialize only when their toggle is on
        const toggle = el(this.doc, "input") as HTMLInputElement;
        toggle.type = "checkbox";
        toggle.className = "include-toggle";
        toggle.setAttribute("data-include-for", `${path}/${name}`);
        row.appendChild(toggle);
        includes.set(name, toggle);
      } else {
        row.appendChild(el(this.doc, "span", "required-marker", "*"));
      }
      const child = this.build(`${path}/${name}`, inner);
      children.set(name, child);
      row.appendChild(child.root);
      wrap.appendChild(row);
    }
    return { kind: "object", path, spec, root: wrap, children, includes };
  }

  private buildArray(path: string, spec: FieldSpec): ArrayControl {
    const wrap = this.labelled(path, spec);
    wrap.classList.add("array");
    const rowHost = el(this.doc, "div", "array-rows");
    wrap.appendChild(rowHost);
    const control: ArrayControl = { kind: "array", path, spec, root: wrap, rows: [], rowHost };
    const add = el(this.doc, "button", "add-row", "add row");
    add.type = "button";
    add.addEventListener("click", () => this.addRow(path));
    wrap.appendChild(add);
    return control;
  }

  // -- reading and checking --

  private find(path: string): Control | null {
    if (path === "" || path === "/") return this.rootControl;
    const parts = path.split("/").slice(1);
    let current: Control = this.rootControl;
    for (const part of parts) {
      if (current.kind === "object") {
        const next: Control | undefined = current.children.get(part);
        if (!next) return null;
        current = next;
      } else if (current.kind === "array") {
        const next: Control | undefined = current.rows[Number(part)];
        if (!next) return null;
        current = next;
      } else {
        return null;
      }
    }
    return current;
  }

  private read(control: Control): unknown {
    switch (control.kind) {
      case "string":
        return control.input.value;
      case "integer":
      case "number": {
        if (control.input.value.trim() === "") return MISSING;
        return Number(control.input.value);
      }
      case "boolean":
        return control.input.checked;
      case "enum":
        return control.select.value;
      case "object": {
        const out: Record<string, unknown> = {};
        for (const [name, child] of control.children) {
          const toggle = control.includes.get(name);
          if (toggle && !toggle.checked) continue;
          const value = this.read(child);
          if (value !== MISSING) out[name] = value;
        }
        return out;
      }
      case "array":
        return control.rows.map((row) => {
          const value = this.read(row);
          return value === MISSING ? null : value;
        });
    }
  }

  private check(control: Control, found: ClientViolation[]): void {
    const { path, spec } = control;
    switch (control.kind) {
      case "string": {
        const value = control.input.value;
        if (spec.minLength !== undefined && value.length < spec.minLength) {
          found.push({ path, code: "LENGTH", message: `shorter than ${spec.minLength}` });
        }
        if (spec.maxLength !== undefined && value.length > spec.maxLength) {
          found.push({ path, code: "LENGTH", message: `longer than ${spec.maxLength}` });
        }
        return;
      }
      case "integer":
      case "number": {
        const raw = control.input.value.trim();
        if (raw === "") {
          found.push({ path, code: "REQUIRED_MISSING", message: "no value entered" });
          return;
        }
        const value = Number(raw);
        if (!Number.isFinite(value)) {
          found.push({ path, code: "TYPE_MISMATCH", message: "not a number" });
          return;
        }
        if (control.kind === "integer" && !Number.isInteger(value)) {
          found.push({ path, code: "TYPE_MISMATCH", message: "not a whole number" });
          return;
        }
        if (spec.min !== undefined && value < spec.min) {
          found.push({ path, code: "RANGE", message: `below ${spec.min}` });
        }
        if (spec.max !== undefined && value > spec.max) {
          found.push({ path, code: "RANGE", message: `above ${spec.max}` });
        }
        return;
      }
      case "boolean":
        return;
      case "enum": {
        const values = spec.values ?? [];
        if (!values.includes(control.select.value)) {
          found.push({ path, code: "ENUM_VIOLATION", message: "not an allowed value" });
        }
        return;
      }
      case "object": {
        for (const [name, child] of control.children) {
          const toggle = control.includes.get(name);
          if (toggle && !toggle.checked) continue;
          this.check(child, found);
        }
        return;
      }
      case "array": {
        for (const row of control.rows) this.check(row, found);
        return;
      }
    }
  }
}

/**
 * Boundary fill for a schema: every field present, scalars at their low
 * or high extreme. Used by tests to prove generated forms round-trip
 * through server validation.
 */
export function boundaryDocument(schema: SchemaDoc, side: "low" | "high"): Record<string, unknown> {
  return boundaryValue(schema as FieldSpec, side) as Record<string, unknown>;
}

function boundaryValue(spec: FieldSpec, side: "low" | "high"): unknown {
  switch (spec.kind) {
    case "string": {
      const length = side === "low" ? (spec.minLength ?? 0) : (spec.maxLength ?? spec.minLength ?? 4);
      return "x".repeat(length);
    }
    case "integer": {
      if (side === "low") return spec.min ?? (spec.max !== undefined ? spec.max - 1 : 0);
      return spec.max ?? (spec.min !== undefined ? spec.min + 1 : 1);
    }
    case "number": {
      if (side === "low") return spec.min ?? (spec.max !== undefined ? spec.max - 1 : 0);
      return spec.max ?? (spec.min !== undefined ? spec.min + 1 : 1.5);
    }
    case "boolean":
      return side === "high";
    case "enum": {
      const values = spec.values ?? [];
      return side === "low" ? values[0] : values[values.length - 1];
    }
    case "object": {
      const out: Record<string, unknown> = {};
      for (const [name, inner] of Object.entries(spec.fields ?? {})) {
        out[name] = boundaryValue(inner, side);
      }
      return out;
    }
    case "array":
      return spec.items ? [boundaryValue(spec.items, side)] : [];
  }
}

/** Fills a form with the given document, adding array rows and toggling
 * optional fields on as it goes. */
export function fillForm(form: FormModel, doc: Record<string, unknown>): void {
  fillInto(form, "", doc);
}

function fillInto(form: FormModel, path: string, value: unknown): void {
  if (Array.isArray(value)) {
    for (const entry of value) {
      const rowPath = form.addRow(path);
      fillInto(form, rowPath, entry);
    }
    return;
  }
  if (typeof value === "object" && value !== null) {
    for (const [name, inner] of Object.entries(value)) {
      const childPath = `${path}/${name}`;
      try {
        form.setIncluded(childPath, true);
      } catch {
        // required fields have no toggle
      }
      fillInto(form, childPath, inner);
    }
    return;
  }
  form.setValue(path, value);
}
