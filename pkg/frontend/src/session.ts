/** Per-tab console state: the alert cursor (monotone, gap/duplicate-free by
 * construction), a cached registry view, and the last model version seen. */

import type { AlertEvent, AlertsResult, Prediction } from "./types.js";

export class ConsoleSession {
  readonly agentId: string;
  private _cursor = 0;
  private _lastModelVersion = 0;
  private readonly _feed: AlertEvent[] = [];
  private readonly _registry = new Map<string, Prediction>();

  constructor(agentId: string) {
    this.agentId = agentId;
  }

  get cursor(): number {
    return this._cursor;
  }

  get lastModelVersion(): number {
    return this._lastModelVersion;
  }

  get feed(): readonly AlertEvent[] {
    return this._feed;
  }

  get registry(): ReadonlyMap<string, Prediction> {
    return this._registry;
  }

  notePrediction(pred: Prediction): void {
    this._registry.set(pred.subject_id, pred);
    if (pred.model_version > this._lastModelVersion) {
      this._lastModelVersion = pred.model_version;
    }
  }

  noteModelVersion(version: number): void {
    if (version > this._lastModelVersion) {
      this._lastModelVersion = version;
    }
  }

  /** Merge an alerts response: only ids beyond the cursor enter the feed, in
   * id order, and the cursor never moves backwards. Returns the new events. */
  ingestAlerts(result: AlertsResult): AlertEvent[] {
    const fresh = result.alerts
      .filter((a) => a.alert_id > this._cursor)
      .sort((a, b) => a.alert_id - b.alert_id);
    for (const alert of fresh) {
      this._feed.push(alert);
      this._cursor = alert.alert_id;
      this.noteModelVersion(alert.model_version);
    }
    if (result.cursor > this._cursor) {
      this._cursor = result.cursor;
    }
    return fresh;
  }
}
