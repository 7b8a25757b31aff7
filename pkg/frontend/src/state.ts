// Console state and the event reducer.
//
// applyEvent is pure: replaying the same event log over the initial
// state always produces the same state, so rendering is idempotent and
// reconnects can rebuild the view from a snapshot plus the stream.

export interface LogLine {
  kind: string;
  text: string;
  time: number;
}

export interface ConsoleState {
  worldName: string;
  running: boolean;
  passCount: number;
  agents: Record<string, { id: string; class: string; node: string; level: number }>;
  classes: string[];
  eventLog: LogLine[];
  lastEvent: string;
  stale: boolean; // true until the next server fetch confirms the tables
}

export const EVENT_LOG_LIMIT = 500;

export function initialState(): ConsoleState {
  return {
    worldName: "",
    running: false,
    passCount: 0,
    agents: {},
    classes: [],
    eventLog: [],
    lastEvent: "",
    stale: true,
  };
}

function pushLog(state: ConsoleState, kind: string, text: string, time: number): void {
  state.eventLog.push({ kind, text, time });
  if (state.eventLog.length > EVENT_LOG_LIMIT) {
    state.eventLog.splice(0, state.eventLog.length - EVENT_LOG_LIMIT);
  }
}

type Payload = Record<string, unknown>;

export function applyEvent(state: ConsoleState, event: string, payload: unknown): ConsoleState {
  const p = (payload ?? {}) as Payload;
  const time = typeof p.time === "number" ? p.time : 0;
  state.lastEvent = event;
  switch (event) {
    case "pass": {
      state.passCount += 1;
      const actions = (p.actions as Payload[]) ?? [];
      for (const a of actions) {
        pushLog(state, "pass", `#${p.seq} ${a.agent} ${a.action} ${a.detail ?? ""}`.trim(), time);
      }
      break;
    }
    case "agent+": {
      const id = String(p.id ?? "");
      state.agents[id] = {
        id,
        class: String(p.class ?? ""),
        node: String(p.node ?? ""),
        level: Number(p.level ?? 0),
      };
      pushLog(state, event, `${id} (${p.class}) on ${p.node}`, time);
      break;
    }
    case "agent-": {
      const id = String(p.id ?? "");
      delete state.agents[id];
      pushLog(state, event, `${id} (${p.class}) left ${p.node}`, time);
      break;
    }
    case "class+": {
      const name = String(p.name ?? "");
      if (!state.classes.includes(name)) state.classes.push(name);
      pushLog(state, event, name, time);
      break;
    }
    case "log":
      pushLog(state, "log", `[${p.node}/${p.agent}] ${p.line}`, time);
      break;
    case "signal":
      pushLog(state, "signal", `${p.sig} -> ${p.to}`, time);
      break;
    case "link+":
    case "link-":
      pushLog(state, event, JSON.stringify(payload), time);
      break;
    case "agent-fault":
    case "warn":
    case "schedule-exceeded":
      pushLog(state, event, JSON.stringify(payload), time);
      break;
    default:
      pushLog(state, event, JSON.stringify(payload), time);
  }
  return state;
}

export function replay(events: [string, unknown][]): ConsoleState {
  const state = initialState();
  for (const [event, payload] of events) applyEvent(state, event, payload);
  return state;
}

// Server fetches are the source of truth for the tables; SSE keeps them
// fresh between fetches (within one event of a change).
export function reconcileAgents(
  state: ConsoleState,
  rows: { id: string; class: string; node: string; level: number }[],
): ConsoleState {
  state.agents = {};
  for (const row of rows) {
    state.agents[row.id] = { id: row.id, class: row.class, node: row.node, level: row.level };
  }
  state.stale = false;
  return state;
}
