/** Browser entry point: socket + key capture + render loop + rating modal. */

import { captureKeys } from "./keys.js";
import { render } from "./render.js";
import { GameSocket, estimateLatencyMs, WsLike } from "./socket.js";
import {
  applyMessage,
  initialUiState,
  markConnection,
  markRatingSubmitted,
  UiState,
} from "./state.js";

function wsUrl(): string {
  const proto = location.protocol === "https:" ? "wss" : "ws";
  return `${proto}://${location.host}/ws`;
}

export function start(): void {
  const canvas = document.getElementById("game") as HTMLCanvasElement;
  const ctx = canvas.getContext("2d")!;
  const modal = document.getElementById("rating-modal") as HTMLElement;
  const latencyEl = document.getElementById("latency") as HTMLElement;

  let ui: UiState = initialUiState();

  const socket = new GameSocket(
    wsUrl(),
    (url) => new WebSocket(url) as unknown as WsLike,
    {
      onMessage(msg) {
        ui = applyMessage(ui, msg);
        modal.style.display = ui.ratingVisible ? "flex" : "none";
      },
      onConnection(open) {
        ui = markConnection(ui, open ? "open" : "closed");
      },
    },
  );
  socket.connect();

  captureKeys(window, {
    sendKey(key, action) {
      socket.sendKey(key, action);
    },
  });

  for (const button of modal.querySelectorAll("button[data-rating]")) {
    button.addEventListener("click", () => {
      const next = markRatingSubmitted(ui);
      if (next === null) return; // duplicate press
      ui = next;
      socket.sendRating(Number((button as HTMLElement).dataset.rating));
      modal.style.display = "none";
    });
  }

  estimateLatencyMs(location.origin)
    .then((ms) => {
      ui = { ...ui, latencyMs: ms };
      latencyEl.textContent = `~${ms.toFixed(0)} ms`;
    })
    .catch(() => undefined);

  const loop = () => {
    render(ctx, ui);
    requestAnimationFrame(loop);
  };
  requestAnimationFrame(loop);
}

if (typeof document !== "undefined") {
  start();
}
