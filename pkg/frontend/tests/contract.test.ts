/** Contract tests against recorded gateway responses: the client surfaces
 * exactly the numbers the gateway computed, and error envelopes map to typed
 * failures. */

import { describe, expect, it } from "vitest";

import { GatewayClient, GatewayError } from "../src/client.js";
import type { EnrollResult, Prediction } from "../src/types.js";
import { fixture, fixtureFetch, type RouteTable } from "./helpers.js";

function client(routes: RouteTable, log?: string[]): GatewayClient {
  return new GatewayClient("http://gw", fixtureFetch(routes, log));
}

describe("gateway client against recorded responses", () => {
  it("enroll passes the gateway's prediction through untouched", async () => {
    const rec = fixture("enroll_s01");
    const gw = client(new Map([["POST /agents/agent-1/enroll", rec]]));
    const result = await gw.enroll("agent-1", {
      subject_id: "s01",
      locality_id: "locA",
      values: [1, 1, 3, 8],
      collected_at: 1,
    });
    const want = (rec.body.result as EnrollResult).prediction;
    // exact equality: the console must not recompute or round anything
    expect(result.prediction.score).toBe(want.score);
    expect(result.prediction.alpha).toBe(want.alpha);
    expect(result.prediction.vulnerable).toBe(want.vulnerable);
    expect(result.prediction.model_version).toBe(want.model_version);
  });

  it("range violations surface as GatewayError naming the feature", async () => {
    const gw = client(
      new Map([["POST /agents/agent-1/enroll", fixture("enroll_invalid")]]),
    );
    await expect(
      gw.enroll("agent-1", {
        subject_id: "bad",
        locality_id: "locA",
        values: [1, 1, 9, 8],
        collected_at: 9,
      }),
    ).rejects.toSatisfy((err: unknown) => {
      expect(err).toBeInstanceOf(GatewayError);
      const ge = err as GatewayError;
      expect(ge.status).toBe(422);
      expect(ge.info.code).toBe("RANGE_VIOLATION");
      expect(ge.info.field).toBe("exposure");
      return true;
    });
  });

  it("unknown subjects on incidents map to UNKNOWN_SUBJECT", async () => {
    const gw = client(
      new Map([
        ["POST /agents/agent-1/incidents", fixture("incident_unknown")],
      ]),
    );
    await expect(
      gw.reportIncident("agent-1", "ghost", "trafficked", 11),
    ).rejects.toSatisfy((err: unknown) => {
      expect((err as GatewayError).info.code).toBe("UNKNOWN_SUBJECT");
      return true;
    });
  });

  it("incident responses carry the retrained version and alerts", async () => {
    const rec = fixture("incident_flip");
    const gw = client(new Map([["POST /agents/agent-1/incidents", rec]]));
    const result = await gw.reportIncident("agent-1", "s01", "trafficked", 10);
    const want = rec.body.result as {
      alerts: { alert_id: number }[];
      model_version: number;
    };
    expect(result.model_version).toBe(want.model_version);
    expect(result.alerts.map((a) => a.alert_id)).toEqual(
      want.alerts.map((a) => a.alert_id),
    );
  });

  it("alert feeds and cursors pass through", async () => {
    const rec = fixture("alerts_after_flip");
    const gw = client(new Map([["GET /agents/agent-1/alerts?since=0", rec]]));
    const result = await gw.alerts("agent-1", 0);
    const want = rec.body.result as { cursor: number };
    expect(result.cursor).toBe(want.cursor);
  });

  it("prediction lookups return the cached gateway prediction", async () => {
    const rec = fixture("prediction_s04");
    const gw = client(
      new Map([["GET /agents/agent-1/predictions/s04", rec]]),
    );
    const { prediction } = await gw.prediction("agent-1", "s04");
    const want = (rec.body.result as { prediction: Prediction }).prediction;
    expect(prediction).toEqual(want);
  });

  it("similarity stats and cluster views pass through untouched", async () => {
    const sim = fixture("similarity_stats");
    const view = fixture("cluster_view");
    const gw = client(
      new Map([
        ["GET /agents/agent-1/similarity-stats", sim],
        ["GET /agents/agent-1/cluster-view?clusters=2", view],
      ]),
    );
    const stats = await gw.similarityStats("agent-1");
    expect(stats).toEqual(sim.body.result);
    const cv = await gw.clusterView("agent-1", 2);
    expect(cv).toEqual(view.body.result);
  });

  it("schema fetch drives form construction", async () => {
    const rec = fixture("schema");
    const gw = client(new Map([["GET /schema", rec]]));
    const schema = await gw.schema();
    expect(schema.features.map((f) => f.id)).toEqual([
      "risk_a",
      "risk_b",
      "exposure",
      "distance",
    ]);
  });
});
