import { describe, expect, it, vi } from "vitest";
import { backoffDelay } from "../src/backoff.js";
import type { ServerMsg } from "../src/protocol.js";
import { GameSocket, WsLike } from "../src/socket.js";

class FakeWs implements WsLike {
  static instances: FakeWs[] = [];
  sentFrames: string[] = [];
  onopen: ((ev?: unknown) => void) | null = null;
  onclose: ((ev?: unknown) => void) | null = null;
  onerror: ((ev?: unknown) => void) | null = null;
  onmessage: ((ev: { data: unknown }) => void) | null = null;

  constructor(public url: string) {
    FakeWs.instances.push(this);
  }
  send(data: string): void {
    this.sentFrames.push(data);
  }
  close(): void {
    this.onclose?.();
  }
}

describe("backoffDelay", () => {
  it("doubles up to the cap and then gives up", () => {
    const cfg = { baseMs: 100, maxMs: 800, maxAttempts: 5 };
    expect([1, 2, 3, 4, 5].map((n) => backoffDelay(n, cfg))).toEqual(
      [100, 200, 400, 800, 800],
    );
    expect(backoffDelay(6, cfg)).toBeNull();
  });
});

describe("GameSocket", () => {
  it("delivers parsed messages and drops junk", () => {
    FakeWs.instances = [];
    const seen: ServerMsg[] = [];
    const sock = new GameSocket("ws://x/ws", (u) => new FakeWs(u), {
      onMessage: (m) => seen.push(m),
      onConnection: () => undefined,
    });
    sock.connect();
    const ws = FakeWs.instances[0]!;
    ws.onopen?.();
    ws.onmessage?.({ data: JSON.stringify({ v: 1, type: "quality", railed: [false] }) });
    ws.onmessage?.({ data: "garbage" });
    expect(seen).toHaveLength(1);
    sock.close();
  });

  it("reconnects with backoff after an unexpected close", async () => {
    vi.useFakeTimers();
    FakeWs.instances = [];
    const connections: boolean[] = [];
    const sock = new GameSocket(
      "ws://x/ws",
      (u) => new FakeWs(u),
      { onMessage: () => undefined, onConnection: (open) => connections.push(open) },
      { baseMs: 50, maxMs: 200, maxAttempts: 3 },
    );
    sock.connect();
    expect(FakeWs.instances).toHaveLength(1);
    FakeWs.instances[0]!.onopen?.();
    FakeWs.instances[0]!.onclose?.(); // dropped by the network
    expect(FakeWs.instances).toHaveLength(1);
    await vi.advanceTimersByTimeAsync(50);
    expect(FakeWs.instances).toHaveLength(2); // first retry after baseMs
    FakeWs.instances[1]!.onclose?.();
    await vi.advanceTimersByTimeAsync(100);
    expect(FakeWs.instances).toHaveLength(3);
    expect(connections).toEqual([true, false, false]);
    sock.close();
    vi.useRealTimers();
  });

  it("does not reconnect after a user-initiated close", async () => {
    vi.useFakeTimers();
    FakeWs.instances = [];
    const sock = new GameSocket("ws://x/ws", (u) => new FakeWs(u), {
      onMessage: () => undefined,
      onConnection: () => undefined,
    });
    sock.connect();
    sock.close();
    await vi.advanceTimersByTimeAsync(10_000);
    expect(FakeWs.instances).toHaveLength(1);
    vi.useRealTimers();
  });

  it("sends key and rating frames on the live socket", () => {
    FakeWs.instances = [];
    const sock = new GameSocket("ws://x/ws", (u) => new FakeWs(u), {
      onMessage: () => undefined,
      onConnection: () => undefined,
    });
    sock.connect();
    const ws = FakeWs.instances[0]!;
    ws.onopen?.();
    sock.sendKey("left", "down");
    sock.sendRating(5);
    expect(ws.sentFrames.map((f) => JSON.parse(f).type)).toEqual(["key", "rating"]);
  });
});
