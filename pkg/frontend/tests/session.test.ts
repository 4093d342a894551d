import { describe, expect, it } from "vitest";

import { ConsoleSession } from "../src/session.js";
import type { AlertEvent, AlertsResult } from "../src/types.js";

function alert(id: number, subject = `s${id}`): AlertEvent {
  return {
    alert_id: id,
    kind: "ENTERED_DANGER_ZONE",
    subject_id: subject,
    detail: {},
    model_version: 1,
    timestamp: 100 + id,
  };
}

function result(alerts: AlertEvent[], cursor?: number): AlertsResult {
  return { alerts, cursor: cursor ?? alerts.at(-1)?.alert_id ?? 0 };
}

describe("ConsoleSession alert cursor", () => {
  it("starts at zero and advances to the newest ingested id", () => {
    const s = new ConsoleSession("agent-1");
    expect(s.cursor).toBe(0);
    const fresh = s.ingestAlerts(result([alert(1), alert(2)]));
    expect(fresh.map((a) => a.alert_id)).toEqual([1, 2]);
    expect(s.cursor).toBe(2);
  });

  it("never duplicates alerts when responses overlap", () => {
    const s = new ConsoleSession("agent-1");
    s.ingestAlerts(result([alert(1), alert(2)]));
    const fresh = s.ingestAlerts(result([alert(1), alert(2), alert(3)]));
    expect(fresh.map((a) => a.alert_id)).toEqual([3]);
    expect(s.feed.map((a) => a.alert_id)).toEqual([1, 2, 3]);
  });

  it("keeps the feed gap-free and ordered even from unordered payloads", () => {
    const s = new ConsoleSession("agent-1");
    s.ingestAlerts(result([alert(2), alert(1), alert(4), alert(3)]));
    expect(s.feed.map((a) => a.alert_id)).toEqual([1, 2, 3, 4]);
  });

  it("cursor is monotone even against stale responses", () => {
    const s = new ConsoleSession("agent-1");
    s.ingestAlerts(result([alert(5)], 5));
    s.ingestAlerts(result([], 2)); // stale poll response
    expect(s.cursor).toBe(5);
    expect(s.feed).toHaveLength(1);
  });

  it("empty responses advance the cursor when the server says so", () => {
    const s = new ConsoleSession("agent-1");
    s.ingestAlerts(result([], 7));
    expect(s.cursor).toBe(7);
  });

  it("tracks the newest model version seen", () => {
    const s = new ConsoleSession("agent-1");
    expect(s.lastModelVersion).toBe(0);
    s.notePrediction({
      subject_id: "x",
      score: 0.5,
      vulnerable: false,
      alpha: 0,
      model_version: 2,
    });
    s.noteModelVersion(1); // lower: ignored
    expect(s.lastModelVersion).toBe(2);
  });
});
