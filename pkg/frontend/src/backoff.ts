/** Exponential backoff with a cap; pure so the schedule is testable. */

export interface BackoffConfig {
  baseMs: number;
  maxMs: number;
  maxAttempts: number;
}

export const DEFAULT_BACKOFF: BackoffConfig = {
  baseMs: 500,
  maxMs: 8000,
  maxAttempts: 12,
};

/** Delay before reconnect attempt n (1-based); null when out of attempts. */
export function backoffDelay(attempt: number, cfg: BackoffConfig = DEFAULT_BACKOFF): number | null {
  if (attempt > cfg.maxAttempts) return null;
  return Math.min(cfg.baseMs * 2 ** (attempt - 1), cfg.maxMs);
}
