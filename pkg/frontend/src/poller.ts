/** Cursor-based alert polling. One in-flight request at a time; every new
 * alert lands in the session exactly once regardless of response overlap. */

import type { GatewayClient } from "./client.js";
import type { ConsoleSession } from "./session.js";
import type { AlertEvent } from "./types.js";

export class AlertPoller {
  private timer: ReturnType<typeof setInterval> | null = null;
  private inFlight = false;

  constructor(
    private readonly client: GatewayClient,
    private readonly session: ConsoleSession,
    private readonly onNew: (alerts: AlertEvent[]) => void,
    readonly intervalMs = 2000,
  ) {}

  start(): void {
    if (this.timer !== null) return;
    this.timer = setInterval(() => {
      void this.tick();
    }, this.intervalMs);
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }

  async tick(): Promise<void> {
    if (this.inFlight) return;
    this.inFlight = true;
    try {
      const result = await this.client.alerts(
        this.session.agentId,
        this.session.cursor,
      );
      const fresh = this.session.ingestAlerts(result);
      if (fresh.length > 0) {
        this.onNew(fresh);
      }
    } catch {
      // transient fetch errors: next tick retries from the same cursor
    } finally {
      this.inFlight = false;
    }
  }
}
