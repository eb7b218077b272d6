/**
 * Canvas renderer. Positions come straight from the last server state;
 * nothing here moves on its own, so a stale frame means a stale server
 * feed, which the connection banner makes visible.
 */

import type { UiState } from "./state.js";

export const FIELD_W = 800;
export const FIELD_H = 600;
const BAR_W = 150;
const BAR_H = 20;
const BOX = 40;

export function render(ctx: CanvasRenderingContext2D, ui: UiState): void {
  ctx.clearRect(0, 0, FIELD_W, FIELD_H);
  ctx.fillStyle = "#101418";
  ctx.fillRect(0, 0, FIELD_W, FIELD_H);

  const s = ui.state;
  if (s) {
    ctx.fillStyle = "#3b82f6";
    ctx.fillRect(s.box[0] - BOX / 2, s.box[1], BOX, BOX);
    ctx.fillStyle = "#dc2626";
    ctx.fillRect(s.bar_x - BAR_W / 2, FIELD_H - BAR_H, BAR_W, BAR_H);

    ctx.fillStyle = "#e5e7eb";
    ctx.font = "16px monospace";
    ctx.fillText(`score ${s.score}  streak ${s.streak}`, 12, 24);
    ctx.fillText(`${s.phase}  ${Math.max(0, s.remaining_s).toFixed(0)}s`, 12, 46);
  }

  drawQualityBadges(ctx, ui.railed);

  if (ui.connection !== "open") {
    ctx.fillStyle = "rgba(0,0,0,0.6)";
    ctx.fillRect(0, FIELD_H / 2 - 30, FIELD_W, 60);
    ctx.fillStyle = "#fbbf24";
    ctx.font = "20px monospace";
    const text = ui.connection === "connecting" ? "connecting..." : "connection lost - state frozen";
    ctx.fillText(text, FIELD_W / 2 - ctx.measureText(text).width / 2, FIELD_H / 2 + 6);
  }
}

function drawQualityBadges(ctx: CanvasRenderingContext2D, railed: boolean[]): void {
  const size = 14;
  railed.forEach((bad, i) => {
    ctx.fillStyle = bad ? "#dc2626" : "#22c55e";
    ctx.fillRect(FIELD_W - (railed.length - i) * (size + 4) - 8, 10, size, size);
  });
}
