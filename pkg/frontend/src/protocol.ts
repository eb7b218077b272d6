/**
 * Wire schema shared with the game server: one JSON object per text
 * message, schema version 1. The client treats everything it receives
 * as untrusted and narrows with the guards below.
 */

export const SCHEMA_V = 1;

export type Phase = "training" | "demo" | "record" | "control" | "rating" | "idle";

export interface StateMsg {
  v: number;
  type: "state";
  t: number;
  bar_x: number;
  box: [number, number];
  score: number;
  streak: number;
  phase: Phase;
  remaining_s: number;
}

export interface PhaseMsg {
  v: number;
  type: "phase";
  name: Phase;
  duration_s: number;
}

export interface QualityMsg {
  v: number;
  type: "quality";
  railed: boolean[];
}

export type ServerMsg = StateMsg | PhaseMsg | QualityMsg;

export interface KeyMsg {
  v: number;
  type: "key";
  key: "left" | "right";
  action: "down" | "up";
  t_client: number;
}

export interface RatingMsg {
  v: number;
  type: "rating";
  value: number;
}

export type ClientMsg = KeyMsg | RatingMsg;

function isRecord(x: unknown): x is Record<string, unknown> {
  return typeof x === "object" && x !== null;
}

export function parseServerMsg(raw: string): ServerMsg | null {
  let doc: unknown;
  try {
    doc = JSON.parse(raw);
  } catch {
    return null;
  }
  if (!isRecord(doc) || doc.v !== SCHEMA_V) return null;
  switch (doc.type) {
    case "state":
      if (
        typeof doc.t === "number" &&
        typeof doc.bar_x === "number" &&
        Array.isArray(doc.box) &&
        doc.box.length === 2 &&
        typeof doc.score === "number" &&
        typeof doc.streak === "number" &&
        typeof doc.phase === "string" &&
        typeof doc.remaining_s === "number"
      ) {
        return doc as unknown as StateMsg;
      }
      return null;
    case "phase":
      if (typeof doc.name === "string" && typeof doc.duration_s === "number") {
        return doc as unknown as PhaseMsg;
      }
      return null;
    case "quality":
      if (Array.isArray(doc.railed) && doc.railed.every((b) => typeof b === "boolean")) {
        return doc as unknown as QualityMsg;
      }
      return null;
    default:
      return null;
  }
}

export function keyMsg(key: "left" | "right", action: "down" | "up", tClient: number): string {
  const msg: KeyMsg = { v: SCHEMA_V, type: "key", key, action, t_client: tClient };
  return JSON.stringify(msg);
}

export function ratingMsg(value: number): string {
  if (!Number.isInteger(value) || value < 1 || value > 5) {
    throw new Error(`rating must be an integer 1-5, got ${value}`);
  }
  const msg: RatingMsg = { v: SCHEMA_V, type: "rating", value };
  return JSON.stringify(msg);
}
