/**
 * WebSocket wrapper with reconnect/backoff and a latest-state slot.
 * Transport is injected so the browser uses the native WebSocket and
 * node tests use the `ws` package through the same code path.
 */

import { backoffDelay, BackoffConfig, DEFAULT_BACKOFF } from "./backoff.js";
import { keyMsg, parseServerMsg, ratingMsg, ServerMsg } from "./protocol.js";
import type { GameKey } from "./keys.js";

export interface WsLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
}

export type WsFactory = (url: string) => WsLike;

export interface SocketEvents {
  onMessage(msg: ServerMsg): void;
  onConnection(open: boolean): void;
  onGiveUp?(): void;
}

export class GameSocket {
  private ws: WsLike | null = null;
  private attempt = 0;
  private closedByUser = false;
  private timer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private url: string,
    private factory: WsFactory,
    private events: SocketEvents,
    private backoff: BackoffConfig = DEFAULT_BACKOFF,
  ) {}

  connect(): void {
    this.closedByUser = false;
    this.open();
  }

  private open(): void {
    const ws = this.factory(this.url);
    this.ws = ws;
    ws.onopen = () => {
      this.attempt = 0;
      this.events.onConnection(true);
    };
    ws.onmessage = (ev) => {
      const msg = parseServerMsg(String(ev.data));
      if (msg) this.events.onMessage(msg);
    };
    ws.onerror = () => {
      /* onclose always follows */
    };
    ws.onclose = () => {
      this.events.onConnection(false);
      this.ws = null;
      if (!this.closedByUser) this.scheduleReconnect();
    };
  }

  private scheduleReconnect(): void {
    this.attempt += 1;
    const delay = backoffDelay(this.attempt, this.backoff);
    if (delay === null) {
      this.events.onGiveUp?.();
      return;
    }
    this.timer = setTimeout(() => this.open(), delay);
  }

  sendKey(key: GameKey, action: "down" | "up"): void {
    this.ws?.send(keyMsg(key, action, Date.now() / 1000));
  }

  sendRating(value: number): void {
    this.ws?.send(ratingMsg(value));
  }

  close(): void {
    this.closedByUser = true;
    if (this.timer) clearTimeout(this.timer);
    this.ws?.close();
  }
}

/** One HTTP round trip to the health endpoint, as a latency estimate. */
export async function estimateLatencyMs(
  baseUrl: string,
  fetchFn: typeof fetch = fetch,
): Promise<number> {
  const t0 = Date.now();
  await fetchFn(`${baseUrl}/health`);
  return (Date.now() - t0) / 2;
}
