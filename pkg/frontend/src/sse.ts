// Server-sent-event client on fetch streaming, so the same code runs in
// the browser and under vitest/node.  Reconnects with capped backoff and
// reports status transitions; while a stream is healthy nothing polls.

export type SseHandler = (event: string, payload: unknown) => void;
export type SseStatus = "connecting" | "open" | "down";

export interface SseClient {
  close(): void;
  status(): SseStatus;
}

export function connectEvents(
  url: string,
  onEvent: SseHandler,
  onStatus?: (s: SseStatus) => void,
  minBackoffMs = 250,
  maxBackoffMs = 5000,
): SseClient {
  let closed = false;
  let state: SseStatus = "connecting";
  let backoff = minBackoffMs;
  let controller: AbortController | undefined;

  const setStatus = (s: SseStatus) => {
    if (state !== s) {
      state = s;
      onStatus?.(s);
    }
  };

  const loop = async () => {
    while (!closed) {
      setStatus(state === "open" ? "down" : "connecting");
      controller = new AbortController();
      try {
        const resp = await fetch(url, {
          headers: { Accept: "text/event-stream" },
          signal: controller.signal,
        });
        if (!resp.ok || !resp.body) throw new Error(`HTTP ${resp.status}`);
        setStatus("open");
        backoff = minBackoffMs;
        await readStream(resp.body, onEvent, () => closed);
      } catch {
        // fall through to the backoff sleep
      }
      if (closed) break;
      setStatus("down");
      await sleep(backoff);
      backoff = Math.min(backoff * 2, maxBackoffMs);
    }
  };
  void loop();

  return {
    close() {
      closed = true;
      controller?.abort();
    },
    status() {
      return state;
    },
  };
}

async function readStream(
  body: ReadableStream<Uint8Array>,
  onEvent: SseHandler,
  isClosed: () => boolean,
): Promise<void> {
  const reader = body.getReader();
  const decoder = new TextDecoder();
  let buffer = "";
  try {
    for (;;) {
      const { done, value } = await reader.read();
      if (done || isClosed()) return;
      buffer += decoder.decode(value, { stream: true });
      let cut;
      while ((cut = buffer.indexOf("\n\n")) >= 0) {
        const block = buffer.slice(0, cut);
        buffer = buffer.slice(cut + 2);
        dispatchBlock(block, onEvent);
      }
    }
  } finally {
    reader.releaseLock();
  }
}

export function dispatchBlock(block: string, onEvent: SseHandler): void {
  let event = "message";
  const data: string[] = [];
  for (const raw of block.split("\n")) {
    const line = raw.replace(/\r$/, "");
    if (line.startsWith(":")) continue; // heartbeat comment
    if (line.startsWith("event:")) event = line.slice(6).trim();
    else if (line.startsWith("data:")) data.push(line.slice(5).trim());
  }
  if (!data.length) return;
  try {
    onEvent(event, JSON.parse(data.join("\n")));
  } catch {
    onEvent(event, data.join("\n"));
  }
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}
