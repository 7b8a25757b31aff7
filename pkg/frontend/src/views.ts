// DOM rendering. One render(state) pass redraws the data-driven panels;
// handlers call the API and let SSE + reconcile fetches update state.

import { AgentRow, Api, ApiError, LinkRow } from "./api.js";
import { ConsoleState } from "./state.js";

const esc = (s: unknown) =>
  String(s).replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");

export interface ViewHooks {
  refresh(): Promise<void>;
}

export function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

export function renderHeader(state: ConsoleState, sse: string): void {
  el("world-name").textContent = state.worldName || "(world)";
  el("run-state").textContent = state.running ? "running" : "stopped";
  el("pass-count").textContent = String(state.passCount);
  const banner = el("banner");
  if (sse === "open") {
    banner.className = "banner ok";
    banner.textContent = "live";
  } else {
    banner.className = "banner down";
    banner.textContent = sse === "connecting" ? "connecting..." : "connection lost - retrying";
  }
}

export function renderAgents(rows: AgentRow[], api: Api, hooks: ViewHooks): void {
  const byNode = new Map<string, AgentRow[]>();
  for (const row of rows) {
    const list = byNode.get(row.node) ?? [];
    list.push(row);
    byNode.set(row.node, list);
  }
  const root = el("agents");
  root.innerHTML = "";
  for (const [node, list] of byNode) {
    const group = document.createElement("div");
    group.className = "node-group";
    group.innerHTML = `<h3>node ${esc(node)}</h3>`;
    const table = document.createElement("table");
    table.innerHTML =
      "<tr><th>id</th><th>class</th><th>lvl</th><th>next</th><th>prio</th>" +
      "<th>cpu ms</th><th>state</th><th></th></tr>";
    for (const a of list) {
      const flags = a.flags.dead ? "dead" : a.flags.suspended ? "suspended"
        : a.flags.blocked ? "blocked" : "ready";
      const tr = document.createElement("tr");
      tr.innerHTML =
        `<td class="mono">${esc(a.id)}</td><td>${esc(a.class)}</td>` +
        `<td>${a.level}</td><td>${esc(a.next ?? "-")}</td><td>${a.priority}</td>` +
        `<td>${a.resources.cpuUsedMs.toFixed(1)}</td><td>${flags}</td>`;
      const actions = document.createElement("td");
      const kill = document.createElement("button");
      kill.textContent = "kill";
      kill.onclick = async () => {
        await api.kill(a.id);
        await hooks.refresh();
      };
      const inspect = document.createElement("button");
      inspect.textContent = "inspect";
      inspect.onclick = () => {
        el("inspector").textContent = JSON.stringify(a, null, 2);
      };
      actions.append(kill, inspect);
      tr.append(actions);
      table.append(tr);
    }
    group.append(table);
    root.append(group);
  }
  if (!rows.length) root.innerHTML = "<p class=dim>no agents</p>";
}

export function renderLinks(links: LinkRow[]): void {
  const root = el("links");
  if (!links.length) {
    root.innerHTML = "<p class=dim>no links</p>";
    return;
  }
  const table = document.createElement("table");
  table.innerHTML = "<tr><th>kind</th><th>peer/target</th><th>state</th><th>via</th></tr>";
  for (const l of links) {
    const tr = document.createElement("tr");
    if (l.virtual) {
      tr.innerHTML = `<td>virtual</td><td class="mono">${esc(l.from)} -> ${esc(l.to)}</td>` +
        `<td>${esc(l.dir ?? "")}</td><td></td>`;
    } else {
      tr.innerHTML = `<td>amp</td><td class="mono">${esc(l.peer)}</td>` +
        `<td>${esc(l.state)}</td><td>${esc(l.url || l.transport || "")}</td>`;
    }
    table.append(tr);
  }
  root.innerHTML = "";
  root.append(table);
}

export function renderTuples(node: string, tuples: unknown[][]): void {
  const root = el("tuples");
  root.innerHTML = `<p class=dim>${tuples.length} tuple(s) on ${esc(node)}</p>`;
  const list = document.createElement("ul");
  for (const t of tuples) {
    const li = document.createElement("li");
    li.className = "mono";
    li.textContent = JSON.stringify(t);
    list.append(li);
  }
  root.append(list);
}

export function renderEvents(state: ConsoleState, filter: string): void {
  const root = el("events");
  const lines = filter
    ? state.eventLog.filter((l) => l.kind.includes(filter) || l.text.includes(filter))
    : state.eventLog;
  root.innerHTML = lines
    .slice(-200)
    .map((l) => `<div class="ev ev-${esc(l.kind)}"><b>${esc(l.kind)}</b> ${esc(l.text)}</div>`)
    .join("");
  root.scrollTop = root.scrollHeight;
}

export function showCompileError(err: unknown): void {
  const box = el("compile-result");
  if (err instanceof ApiError) {
    const where = err.detail.line ? ` (line ${err.detail.line}, col ${err.detail.col})` : "";
    box.className = "err";
    box.textContent = `${err.detail.kind ?? "error"}: ${err.detail.error}${where}`;
  } else {
    box.className = "err";
    box.textContent = String(err);
  }
}

export function showCompileOk(name: string, warnings: string[]): void {
  const box = el("compile-result");
  box.className = "ok";
  box.textContent = `compiled '${name}'` +
    (warnings.length ? ` with warnings: ${warnings.join("; ")}` : "");
}
