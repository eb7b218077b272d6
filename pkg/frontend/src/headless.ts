/**
 * Scripted headless client for node: drives the same socket/state code
 * as the browser against a live server, pumping synthetic key events
 * and recording everything it saw. Used by the integration tests to
 * verify the round trip (every keystroke lands in the server key log
 * exactly once) and the rating flow.
 */

import WebSocket from "ws";
import type { GameKey } from "./keys.js";
import type { ServerMsg, StateMsg } from "./protocol.js";
import { GameSocket, WsLike } from "./socket.js";
import {
  applyMessage,
  initialUiState,
  markConnection,
  markRatingSubmitted,
  UiState,
} from "./state.js";

export interface HeadlessOptions {
  url: string;
  rating?: number; // submitted when the rating form surfaces
}

export class HeadlessClient {
  ui: UiState = initialUiState();
  states: StateMsg[] = [];
  messages: ServerMsg[] = [];
  sent: Array<{ key: GameKey; action: "down" | "up" }> = [];
  private socket: GameSocket;
  private opened: Promise<void>;
  private resolveOpen!: () => void;

  constructor(private opts: HeadlessOptions) {
    this.opened = new Promise((res) => (this.resolveOpen = res));
    this.socket = new GameSocket(
      opts.url,
      (url) => new WebSocket(url) as unknown as WsLike,
      {
        onMessage: (msg) => this.handle(msg),
        onConnection: (open) => {
          this.ui = markConnection(this.ui, open ? "open" : "closed");
          if (open) this.resolveOpen();
        },
      },
    );
  }

  private handle(msg: ServerMsg): void {
    this.messages.push(msg);
    this.ui = applyMessage(this.ui, msg);
    if (msg.type === "state") this.states.push(msg);
    if (this.ui.ratingVisible && this.opts.rating !== undefined) {
      const next = markRatingSubmitted(this.ui);
      if (next !== null) {
        this.ui = next;
        this.socket.sendRating(this.opts.rating);
      }
    }
  }

  async connect(): Promise<void> {
    this.socket.connect();
    await this.opened;
  }

  sendKey(key: GameKey, action: "down" | "up"): void {
    this.socket.sendKey(key, action);
    this.sent.push({ key, action });
  }

  /** n alternating down/up events split across both keys, paced evenly. */
  async pumpKeys(n: number, totalMs: number): Promise<void> {
    const gap = totalMs / n;
    let down: Record<GameKey, boolean> = { left: false, right: false };
    for (let i = 0; i < n; i++) {
      const key: GameKey = Math.floor(i / 2) % 2 === 0 ? "left" : "right";
      const action = down[key] ? "up" : "down";
      down[key] = !down[key];
      this.sendKey(key, action);
      await sleep(gap);
    }
    // leave no key held
    for (const key of ["left", "right"] as GameKey[]) {
      if (down[key]) this.sendKey(key, "up");
    }
  }

  close(): void {
    this.socket.close();
  }
}

export function sleep(ms: number): Promise<void> {
  return new Promise((res) => setTimeout(res, ms));
}
