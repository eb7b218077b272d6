/**
 * Keyboard capture: left/right Control keys (arrows accepted too) map
 * onto key messages. Holding a key autorepeats keydown in browsers, so
 * transitions are derived from held-state edges: exactly one message
 * per physical press and one per release.
 */

export type GameKey = "left" | "right";

const KEY_CODES: Record<string, GameKey> = {
  ControlLeft: "left",
  ControlRight: "right",
  ArrowLeft: "left",
  ArrowRight: "right",
};

export class KeyTracker {
  private held: Record<GameKey, boolean> = { left: false, right: false };

  /** Returns the transition to emit, or null (unknown key / repeat). */
  press(code: string): GameKey | null {
    const key = KEY_CODES[code];
    if (!key || this.held[key]) return null;
    this.held[key] = true;
    return key;
  }

  release(code: string): GameKey | null {
    const key = KEY_CODES[code];
    if (!key || !this.held[key]) return null;
    this.held[key] = false;
    return key;
  }

  /** Keys to force-release (e.g. window blur mid-hold). */
  releaseAll(): GameKey[] {
    const out: GameKey[] = [];
    for (const key of ["left", "right"] as GameKey[]) {
      if (this.held[key]) {
        this.held[key] = false;
        out.push(key);
      }
    }
    return out;
  }

  isHeld(key: GameKey): boolean {
    return this.held[key];
  }
}

export interface KeySink {
  sendKey(key: GameKey, action: "down" | "up"): void;
}

/** Wire the tracker to DOM keyboard events; returns an unbind function. */
export function captureKeys(target: Window, sink: KeySink): () => void {
  const tracker = new KeyTracker();
  const onDown = (e: KeyboardEvent) => {
    const key = tracker.press(e.code);
    if (key) {
      sink.sendKey(key, "down");
      e.preventDefault();
    }
  };
  const onUp = (e: KeyboardEvent) => {
    const key = tracker.release(e.code);
    if (key) {
      sink.sendKey(key, "up");
      e.preventDefault();
    }
  };
  const onBlur = () => {
    for (const key of tracker.releaseAll()) sink.sendKey(key, "up");
  };
  target.addEventListener("keydown", onDown);
  target.addEventListener("keyup", onUp);
  target.addEventListener("blur", onBlur);
  return () => {
    target.removeEventListener("keydown", onDown);
    target.removeEventListener("keyup", onUp);
    target.removeEventListener("blur", onBlur);
  };
}
