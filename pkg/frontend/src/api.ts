/**
 * Typed client over the engine's HTTP surface. Every write the console
 * performs goes through these methods; there is no other channel.
 */

export interface DescriptionListing {
  name: string;
  versions: number[];
}

export interface FieldSpec {
  kind: "string" | "integer" | "number" | "boolean" | "enum" | "object" | "array";
  min?: number;
  max?: number;
  minLength?: number;
  maxLength?: number;
  values?: string[];
  fields?: Record<string, FieldSpec>;
  required?: string[];
  items?: FieldSpec;
}

export interface SchemaDoc {
  kind: "object";
  fields: Record<string, FieldSpec>;
  required?: string[];
}

export interface ActivityDoc {
  name: string;
  kind: "elementary" | "composite";
  role?: string;
  schemaRef?: string;
  split?: string;
  join?: string;
  consequence?: string;
  guards?: { guard: string; target: string }[];
  nested?: WorkflowDoc;
}

export interface WorkflowDoc {
  activities: ActivityDoc[];
  edges: [string, string][];
}

export interface BundleDoc {
  name: string;
  properties: { name: string; type: string; initial: unknown; mutable: boolean }[];
  collections: { name: string; allowed: string[] }[];
  schemas: Record<string, SchemaDoc>;
  scripts: Record<string, string>;
  workflow: WorkflowDoc;
}

export interface MarkingDoc {
  tokens: Record<string, number[]>;
  joinWait: Record<string, string[]>;
  nextGen: number;
}

export interface ItemSummary {
  id: string;
  name: string;
  descriptionName: string;
  descriptionVersion: number;
  kind: "item" | "description";
  finished: boolean;
  lastEventSeq: number;
}

export interface ItemDoc extends ItemSummary {
  properties: Record<string, unknown>;
  collections: Record<string, string[]>;
  marking: MarkingDoc;
  versions?: Record<string, unknown>;
}

export interface JobDoc {
  jobId: string;
  itemId: string;
  activity: string;
  requiredRole: string;
  schemaRef: string;
}

export interface EventDoc {
  itemId: string;
  seq: number;
  what: string;
  when: string;
  who: string;
  how: string;
  where: string;
  which: string;
  why?: string;
  payload: Record<string, unknown>;
}

export interface PlanDoc {
  itemId: string;
  fromVersion: number;
  toVersion: number;
  tokenMap: Record<string, string>;
  joinWaitMap: Record<string, string[]>;
  notes: string[];
}

export interface ProvDoc {
  entity: Record<string, Record<string, unknown>>;
  activity: Record<string, Record<string, unknown>>;
  agent: Record<string, Record<string, unknown>>;
  wasGeneratedBy: { entity: string; activity: string }[];
  used: { activity: string; entity: string }[];
  wasAssociatedWith: { activity: string; agent: string }[];
  wasDerivedFrom: { generated: string; usedEntity: string }[];
}

export interface AgentDoc {
  id: string;
  displayName: string;
  roles: string[];
}

export interface Violation {
  path: string;
  code: string;
  detail?: string;
}

/** An error response, carrying the engine's code alongside the HTTP status. */
export class ApiError extends Error {
  constructor(
    readonly code: string,
    message: string,
    readonly status: number,
    readonly detail?: Record<string, unknown>,
  ) {
    super(message);
    this.name = "ApiError";
  }

  /** Validation violations from a 422 body, if the detail carries any. */
  violations(): Violation[] {
    const raw = this.detail?.["violations"];
    if (!Array.isArray(raw)) return [];
    return raw.filter(
      (v): v is Violation => typeof v === "object" && v !== null && "path" in v && "code" in v,
    );
  }
}

export type Fetcher = (input: string, init?: RequestInit) => Promise<Response>;

export class Client {
  constructor(
    readonly base: string = "",
    readonly fetcher: Fetcher = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.body = JSON.stringify(body);
      init.headers = { "Content-Type": "application/json" };
    }
    const response = await this.fetcher(this.base + path, init);
    const doc = (await response.json()) as Record<string, unknown>;
    if (!response.ok) {
      throw new ApiError(
        String(doc["code"] ?? "UNKNOWN"),
        String(doc["message"] ?? response.statusText),
        response.status,
        doc["detail"] as Record<string, unknown> | undefined,
      );
    }
    return doc as T;
  }

  listDescriptions(): Promise<{ descriptions: DescriptionListing[] }> {
    return this.request("GET", "/descriptions");
  }

  getDescription(name: string): Promise<DescriptionListing> {
    return this.request("GET", `/descriptions/${encodeURIComponent(name)}`);
  }

  getBundle(name: string, version: number): Promise<BundleDoc> {
    return this.request("GET", `/descriptions/${encodeURIComponent(name)}/${version}`);
  }

  registerBundle(bundle: BundleDoc, agent: string, why?: string): Promise<unknown> {
    return this.request("POST", `/descriptions/${encodeURIComponent(bundle.name)}`, {
      bundle,
      agent,
      ...(why === undefined ? {} : { why }),
    });
  }

  listItems(limit?: number): Promise<ItemSummary[]> {
    const suffix = limit === undefined ? "" : `?limit=${limit}`;
    return this.request("GET", `/items${suffix}`);
  }

  createItem(
    descriptionName: string,
    version: number,
    name: string,
    initialProperties: Record<string, unknown>,
    agent: string,
    why?: string,
  ): Promise<ItemDoc> {
    return this.request("POST", "/items", {
      descriptionName,
      version,
      name,
      initialProperties,
      agent,
      ...(why === undefined ? {} : { why }),
    });
  }

  getItem(itemId: string): Promise<ItemDoc> {
    return this.request("GET", `/items/${itemId}`);
  }

  listJobs(itemId: string, agent: string): Promise<{ jobs: JobDoc[] }> {
    return this.request("GET", `/items/${itemId}/jobs?agent=${encodeURIComponent(agent)}`);
  }

  executeJob(
    itemId: string,
    jobId: string,
    outcome: unknown,
    agent: string,
    why?: string,
  ): Promise<ItemDoc> {
    return this.request("POST", `/items/${itemId}/jobs/${jobId}`, {
      outcome,
      agent,
      ...(why === undefined ? {} : { why }),
    });
  }

  migrateCheck(
    itemId: string,
    toVersion: number,
    remap?: Record<string, string>,
  ): Promise<PlanDoc> {
    return this.request("POST", `/items/${itemId}/migrate/check`, {
      toVersion,
      ...(remap === undefined ? {} : { remap }),
    });
  }

  migrateApply(itemId: string, plan: PlanDoc, agent: string, why?: string): Promise<ItemDoc> {
    return this.request("POST", `/items/${itemId}/migrate/apply`, {
      plan,
      agent,
      ...(why === undefined ? {} : { why }),
    });
  }

  events(
    itemId: string,
    filters: { what?: string; who?: string; from?: string; to?: string; limit?: number } = {},
  ): Promise<{ events: EventDoc[] }> {
    const params = new URLSearchParams();
    if (filters.what) params.set("what", filters.what);
    if (filters.who) params.set("who", filters.who);
    if (filters.from) params.set("from", filters.from);
    if (filters.to) params.set("to", filters.to);
    if (filters.limit !== undefined) params.set("limit", String(filters.limit));
    const qs = params.toString();
    return this.request("GET", `/items/${itemId}/events${qs ? `?${qs}` : ""}`);
  }

  prov(itemId: string): Promise<ProvDoc> {
    return this.request("GET", `/items/${itemId}/prov`);
  }

  listAgents(): Promise<{ agents: AgentDoc[] }> {
    return this.request("GET", "/agents");
  }
}
