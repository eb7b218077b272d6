import { describe, expect, it } from "vitest";
import { keyMsg, parseServerMsg, ratingMsg } from "../src/protocol.js";

describe("parseServerMsg", () => {
  it("accepts a well-formed state message", () => {
    const msg = parseServerMsg(
      JSON.stringify({
        v: 1, type: "state", t: 1.5, bar_x: 400, box: [100, 50],
        score: 2, streak: 1, phase: "training", remaining_s: 28.5,
      }),
    );
    expect(msg).not.toBeNull();
    expect(msg!.type).toBe("state");
    if (msg!.type === "state") {
      expect(msg!.box).toEqual([100, 50]);
    }
  });

  it("accepts phase and quality messages", () => {
    expect(
      parseServerMsg(JSON.stringify({ v: 1, type: "phase", name: "control", duration_s: 30 })),
    ).toMatchObject({ type: "phase", name: "control" });
    expect(
      parseServerMsg(JSON.stringify({ v: 1, type: "quality", railed: [false, true] })),
    ).toMatchObject({ type: "quality" });
  });

  it("rejects wrong version, malformed JSON, and unknown types", () => {
    expect(parseServerMsg(JSON.stringify({ v: 2, type: "state" }))).toBeNull();
    expect(parseServerMsg("{nope")).toBeNull();
    expect(parseServerMsg(JSON.stringify({ v: 1, type: "mystery" }))).toBeNull();
    expect(parseServerMsg(JSON.stringify({ v: 1, type: "quality", railed: [1, 0] }))).toBeNull();
  });
});

describe("client messages", () => {
  it("encodes key transitions with a client timestamp", () => {
    const doc = JSON.parse(keyMsg("left", "down", 1234.5));
    expect(doc).toEqual({ v: 1, type: "key", key: "left", action: "down", t_client: 1234.5 });
  });

  it("bounds ratings to 1..5", () => {
    expect(JSON.parse(ratingMsg(3))).toEqual({ v: 1, type: "rating", value: 3 });
    expect(() => ratingMsg(0)).toThrow();
    expect(() => ratingMsg(6)).toThrow();
    expect(() => ratingMsg(2.5)).toThrow();
  });
});
