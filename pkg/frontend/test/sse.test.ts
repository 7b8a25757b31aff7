// SSE block parsing and the reconnect loop against a throwaway server.

import { createServer, Server } from "node:http";
import { afterEach, describe, expect, it } from "vitest";
import { connectEvents, dispatchBlock } from "../src/sse.js";

describe("dispatchBlock", () => {
  it("parses event and json data lines", () => {
    const seen: [string, unknown][] = [];
    dispatchBlock('event: agent+\ndata: {"id":"x"}', (e, p) => seen.push([e, p]));
    expect(seen).toEqual([["agent+", { id: "x" }]]);
  });

  it("ignores heartbeat comments", () => {
    const seen: unknown[] = [];
    dispatchBlock(": keepalive", (e, p) => seen.push([e, p]));
    expect(seen).toEqual([]);
  });

  it("falls back to text for non-json payloads", () => {
    const seen: [string, unknown][] = [];
    dispatchBlock("event: note\ndata: plain words", (e, p) => seen.push([e, p]));
    expect(seen).toEqual([["note", "plain words"]]);
  });
});

function sseServer(port: number, payloads: string[]): Server {
  const server = createServer((req, res) => {
    res.writeHead(200, { "Content-Type": "text/event-stream" });
    for (const p of payloads) res.write(p);
    // keep the stream open; the test closes the server
  });
  server.listen(port, "127.0.0.1");
  return server;
}

const wait = (ms: number) => new Promise((r) => setTimeout(r, ms));

function shutdown(server: Server): Promise<void> {
  return new Promise((done) => {
    server.closeAllConnections();
    server.close(() => done());
  });
}

describe("connectEvents", () => {
  let server: Server | undefined;
  afterEach(() => (server ? shutdown(server) : Promise.resolve()));

  it("streams events and reports open status", async () => {
    const port = 24110;
    server = sseServer(port, ['event: ping\ndata: {"n":1}\n\n']);
    const events: unknown[] = [];
    const statuses: string[] = [];
    const client = connectEvents(`http://127.0.0.1:${port}/api/events`,
      (e, p) => events.push([e, p]), (s) => statuses.push(s));
    await wait(300);
    client.close();
    expect(events).toEqual([["ping", { n: 1 }]]);
    expect(statuses).toContain("open");
  });

  it("reconnects after the server goes away and comes back", async () => {
    const port = 24111;
    server = sseServer(port, ['event: a\ndata: 1\n\n']);
    const statuses: string[] = [];
    const events: string[] = [];
    const client = connectEvents(`http://127.0.0.1:${port}/api/events`,
      (e) => events.push(e), (s) => statuses.push(s), 50, 200);
    await wait(250);
    await shutdown(server);
    await wait(400); // outage long enough to notice
    server = sseServer(port, ['event: b\ndata: 2\n\n']);
    await wait(800);
    client.close();
    expect(events).toContain("a");
    expect(events).toContain("b"); // stream recovered after restart
    expect(statuses).toContain("down");
    expect(statuses.filter((s) => s === "open").length).toBeGreaterThanOrEqual(2);
  }, 10000);
});
