// Typed client for the node's management HTTP API.
// Every mutation is a plain POST/DELETE; nothing here is optimistic.

export interface AgentRow {
  id: string;
  class: string;
  level: number;
  node: string;
  next: string | null;
  parent: string | null;
  priority: number;
  flags: { blocked: boolean; suspended: boolean; dead: boolean; kill: boolean };
  resources: {
    sliceMs: number;
    cpuUsedMs: number;
    cpuLimitMs: number;
    tsOpsUsed: number;
    agentsCreated: number;
  };
  trace: string[];
}

export interface WorldInfo {
  name: string;
  running: boolean;
  nodes: { id: string; position: { x: number; y: number }; agents: number }[];
  links: unknown[];
  counters: Record<string, number>;
}

export interface LinkRow {
  peer?: string;
  state?: string;
  url?: string;
  direction?: string;
  transport?: string;
  from?: string;
  to?: string;
  dir?: string;
  virtual?: boolean;
}

export interface ClassRow {
  name: string;
  warnings: string[];
  activities: string[];
}

export interface PassReport {
  seq: number;
  time: number;
  actions: { node: string; agent: string; action: string; detail: string; ms: number }[];
}

export interface CompileError {
  error: string;
  kind?: string;
  line?: number;
  col?: number;
}

export class ApiError extends Error {
  status: number;
  detail: CompileError;
  constructor(status: number, detail: CompileError) {
    super(detail.error || `HTTP ${status}`);
    this.status = status;
    this.detail = detail;
  }
}

export class Api {
  base: string;

  constructor(base = "") {
    this.base = base.replace(/\/$/, "");
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await fetch(this.base + path, init);
    const text = await resp.text();
    const body = text ? JSON.parse(text) : null;
    if (!resp.ok) {
      throw new ApiError(resp.status, body ?? { error: `HTTP ${resp.status}` });
    }
    return body as T;
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  world(): Promise<WorldInfo> {
    return this.request("/api/world");
  }

  agents(node?: string): Promise<AgentRow[]> {
    return this.request(`/api/agents${node ? `?node=${node}` : ""}`);
  }

  classes(): Promise<ClassRow[]> {
    return this.request("/api/classes");
  }

  links(): Promise<LinkRow[]> {
    return this.request("/api/links");
  }

  tuples(node: string, arity?: number): Promise<{ node: string; tuples: unknown[][] }> {
    return this.request(`/api/ts/${node}${arity ? `?arity=${arity}` : ""}`);
  }

  compile(source: string): Promise<{ name: string; warnings: string[] }> {
    return this.post("/api/classes", { source });
  }

  create(cls: string, args: unknown = null, level = 1, node?: string): Promise<{ id: string }> {
    return this.post("/api/agents", { class: cls, args, level, node });
  }

  kill(id: string): Promise<{ killed: string }> {
    return this.request(`/api/agents/${id}`, { method: "DELETE" });
  }

  step(n = 1): Promise<PassReport[]> {
    return this.post("/api/step", { n });
  }

  run(on: boolean): Promise<{ running: boolean }> {
    return this.post("/api/run", { on });
  }

  storeTuple(node: string, tuple: unknown[]): Promise<{ stored: boolean }> {
    return this.post(`/api/ts/${node}`, { tuple });
  }
}
