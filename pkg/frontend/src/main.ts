// Bootstrap: wire the API client, the SSE stream, and the panels.
// State changes only on server events or fetch results; every mutation
// round-trips before the tables move.

import { Api } from "./api.js";
import { connectEvents, SseStatus } from "./sse.js";
import { applyEvent, ConsoleState, initialState, reconcileAgents } from "./state.js";
import {
  el, renderAgents, renderEvents, renderHeader, renderLinks, renderTuples,
  showCompileError, showCompileOk,
} from "./views.js";

const api = new Api("");
const state: ConsoleState = initialState();
let sseStatus: SseStatus = "connecting";
let eventFilter = "";
let tupleNode = "";

const hooks = { refresh };

async function refresh(): Promise<void> {
  const [world, agents, links] = await Promise.all([
    api.world(), api.agents(), api.links(),
  ]);
  state.worldName = world.name;
  state.running = world.running;
  reconcileAgents(state, agents);
  renderHeader(state, sseStatus);
  renderAgents(agents, api, hooks);
  renderLinks(links);
  if (!tupleNode && world.nodes.length) tupleNode = world.nodes[0].id;
  if (tupleNode) {
    const doc = await api.tuples(tupleNode);
    renderTuples(tupleNode, doc.tuples);
  }
  renderEvents(state, eventFilter);
}

let refreshQueued = false;
function queueRefresh(): void {
  // collapse event bursts into one fetch per frame-ish interval
  if (refreshQueued) return;
  refreshQueued = true;
  setTimeout(() => {
    refreshQueued = false;
    void refresh().catch(() => undefined);
  }, 80);
}

connectEvents(
  "/api/events",
  (event, payload) => {
    applyEvent(state, event, payload);
    renderEvents(state, eventFilter);
    renderHeader(state, sseStatus);
    if (["agent+", "agent-", "pass", "class+", "link+", "link-"].includes(event)) {
      queueRefresh();
    }
  },
  (status) => {
    sseStatus = status;
    renderHeader(state, sseStatus);
    if (status === "open") queueRefresh(); // rebuild tables on reconnect
  },
);

// -- run controls --

el<HTMLButtonElement>("btn-run").onclick = async () => {
  await api.run(true);
  queueRefresh();
};
el<HTMLButtonElement>("btn-stop").onclick = async () => {
  await api.run(false);
  queueRefresh();
};
el<HTMLButtonElement>("btn-step").onclick = async () => {
  const n = Number(el<HTMLInputElement>("step-n").value) || 1;
  const reports = await api.step(n);
  for (const r of reports) applyEvent(state, "pass-result",
    { seq: r.seq, actions: r.actions.length });
  queueRefresh();
};

// -- class editor --

el<HTMLButtonElement>("btn-compile").onclick = async () => {
  const source = el<HTMLTextAreaElement>("editor").value;
  try {
    const result = await api.compile(source);
    showCompileOk(result.name, result.warnings);
    queueRefresh();
  } catch (err) {
    showCompileError(err);
  }
};

el<HTMLButtonElement>("btn-create").onclick = async () => {
  const cls = el<HTMLInputElement>("create-class").value.trim();
  const level = Number(el<HTMLInputElement>("create-level").value) || 1;
  let args: unknown = null;
  const rawArgs = el<HTMLInputElement>("create-args").value.trim();
  if (rawArgs) {
    try {
      args = JSON.parse(rawArgs);
    } catch {
      showCompileError(new Error("args must be JSON"));
      return;
    }
  }
  try {
    await api.create(cls, args, level);
    queueRefresh();
  } catch (err) {
    showCompileError(err);
  }
};

// -- tuple inspector --

el<HTMLButtonElement>("btn-tuples").onclick = async () => {
  tupleNode = el<HTMLInputElement>("tuple-node").value.trim() || tupleNode;
  queueRefresh();
};
el<HTMLButtonElement>("btn-out").onclick = async () => {
  try {
    const tuple = JSON.parse(el<HTMLInputElement>("tuple-new").value);
    await api.storeTuple(tupleNode, tuple);
    queueRefresh();
  } catch (err) {
    showCompileError(err);
  }
};

// -- event stream filter --

el<HTMLInputElement>("event-filter").oninput = (e) => {
  eventFilter = (e.target as HTMLInputElement).value.trim();
  renderEvents(state, eventFilter);
};

void refresh().catch(() => undefined);
