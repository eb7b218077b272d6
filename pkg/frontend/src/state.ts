/**
 * Client-side view state. The client never simulates game rules: it
 * renders only what the server said last (a latest-value slot), so a
 * reconnect resumes cleanly with no divergence.
 */

import type { PhaseMsg, QualityMsg, ServerMsg, StateMsg } from "./protocol.js";

export type Connection = "connecting" | "open" | "closed";

export interface UiState {
  connection: Connection;
  latencyMs: number | null;
  state: StateMsg | null;
  phase: PhaseMsg | null;
  railed: boolean[];
  ratingVisible: boolean;
  ratingSubmitted: boolean;
  statesSeen: number;
}

export function initialUiState(): UiState {
  return {
    connection: "connecting",
    latencyMs: null,
    state: null,
    phase: null,
    railed: [],
    ratingVisible: false,
    ratingSubmitted: false,
    statesSeen: 0,
  };
}

/** Fold one server message into the view state (pure). */
export function applyMessage(ui: UiState, msg: ServerMsg): UiState {
  switch (msg.type) {
    case "state": {
      const next: UiState = { ...ui, state: msg, statesSeen: ui.statesSeen + 1 };
      // control phase running out surfaces the rating form once
      if (msg.phase === "control" && msg.remaining_s <= 0.05 && !ui.ratingSubmitted) {
        next.ratingVisible = true;
      }
      return next;
    }
    case "phase": {
      const next: UiState = { ...ui, phase: msg };
      if (msg.name === "rating" && !ui.ratingSubmitted) {
        next.ratingVisible = true;
      }
      return next;
    }
    case "quality":
      return { ...ui, railed: msg.railed.slice() };
  }
}

export function markConnection(ui: UiState, connection: Connection): UiState {
  return { ...ui, connection };
}

/** Returns null when a rating was already sent (duplicates suppressed). */
export function markRatingSubmitted(ui: UiState): UiState | null {
  if (ui.ratingSubmitted) return null;
  return { ...ui, ratingSubmitted: true, ratingVisible: false };
}
