/** Console wiring: enrollment form from the gateway schema, incident
 * reporting, the polled alert feed, and the cohort views. */

import { GatewayClient, GatewayError } from "./client.js";
import { buildRecord, gatewayErrorToFieldErrors } from "./forms.js";
import { AlertPoller } from "./poller.js";
import {
  clusterScatter,
  emptyState,
  esc,
  feedEntry,
  outlierBanner,
  peersPanel,
  scoreCard,
  similarityHistogram,
} from "./render.js";
import { ConsoleSession } from "./session.js";
import type { Schema } from "./types.js";

export interface AppOptions {
  agentId: string;
  pollIntervalMs?: number;
}

export interface App {
  session: ConsoleSession;
  poller: AlertPoller;
  refreshViews: () => Promise<void>;
}

function el<K extends keyof HTMLElementTagNameMap>(
  root: Document,
  tag: K,
  attrs: Record<string, string> = {},
  html = "",
): HTMLElementTagNameMap[K] {
  const node = root.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) {
    node.setAttribute(k, v);
  }
  if (html) node.innerHTML = html;
  return node;
}

function fieldInput(root: Document, defId: string, kind: string,
                    hint: string): HTMLElement {
  const wrap = el(root, "label", { class: "field", "data-field": defId });
  wrap.innerHTML =
    `<span class="field-name">${esc(defId)}</span>` +
    `<input name="${esc(defId)}" placeholder="${esc(hint)}">` +
    `<span class="field-error" data-error-for="${esc(defId)}"></span>`;
  return wrap;
}

export async function initApp(
  root: Document,
  client: GatewayClient,
  options: AppOptions,
): Promise<App> {
  const session = new ConsoleSession(options.agentId);
  const mount = root.getElementById("console");
  if (!mount) throw new Error("missing #console mount point");
  mount.innerHTML = `
    <header><h1>field console</h1>
      <span id="agent-badge">${esc(options.agentId)}</span>
      <span id="model-badge">model v0</span></header>
    <section id="enroll-section"><h2>enroll subject</h2>
      <form id="enroll-form">
        <label class="field" data-field="subject_id">
          <span class="field-name">subject id</span>
          <input name="subject_id">
          <span class="field-error" data-error-for="subject_id"></span></label>
        <label class="field" data-field="locality_id">
          <span class="field-name">locality</span>
          <input name="locality_id">
          <span class="field-error" data-error-for="locality_id"></span></label>
        <div id="feature-fields"></div>
        <span class="field-error" data-error-for=""></span>
        <button type="submit">enroll</button>
      </form>
      <div id="enroll-result"></div>
      <div id="outlier-slot"></div></section>
    <section id="incident-section"><h2>report incident</h2>
      <form id="incident-form">
        <input name="subject_id" placeholder="subject id">
        <select name="outcome">
          <option value="trafficked">trafficked</option>
          <option value="confirmed-safe">confirmed safe</option>
        </select>
        <button type="submit">report</button>
      </form>
      <div id="incident-status"></div></section>
    <section id="alerts-section"><h2>alerts</h2>
      <ul id="alert-feed"></ul></section>
    <section id="views-section"><h2>cohort views</h2>
      <button id="refresh-views">refresh</button>
      <div id="cluster-slot">${emptyState("no cluster view yet")}</div>
      <div id="histogram-slot">${emptyState("no similarity data yet")}</div>
      <div id="peers-slot">${emptyState("select a subject for peers")}</div>
    </section>`;

  const schema: Schema = await client.schema();
  const fields = root.getElementById("feature-fields")!;
  for (const def of schema.features) {
    const hint =
      def.kind === "binary"
        ? "0 or 1"
        : def.kind === "ordinal"
          ? `0..${(def.params.arity ?? 1) - 1}`
          : `${def.params.lo}..${def.params.hi}`;
    fields.appendChild(fieldInput(root, def.id, def.kind, hint));
  }

  const modelBadge = root.getElementById("model-badge")!;
  const syncModelBadge = () => {
    modelBadge.textContent = `model v${session.lastModelVersion}`;
  };

  const clearFieldErrors = () => {
    for (const node of Array.from(
      mount.querySelectorAll<HTMLElement>("[data-error-for]"),
    )) {
      node.textContent = "";
    }
  };
  const showFieldErrors = (errors: { fieldId: string; message: string }[]) => {
    for (const err of errors) {
      const slot = mount.querySelector<HTMLElement>(
        `[data-error-for="${err.fieldId}"]`,
      );
      if (slot) slot.textContent = err.message;
    }
  };

  const feedList = root.getElementById("alert-feed")!;
  const poller = new AlertPoller(
    client,
    session,
    (fresh) => {
      for (const alert of fresh) {
        feedList.insertAdjacentHTML("beforeend", feedEntry(alert));
      }
      syncModelBadge();
    },
    options.pollIntervalMs ?? 2000,
  );

  const enrollForm = root.getElementById("enroll-form") as HTMLFormElement;
  let enrollCounter = 0;
  enrollForm.addEventListener("submit", (ev) => {
    ev.preventDefault();
    void (async () => {
      clearFieldErrors();
      const data = new FormData(enrollForm);
      const raw = new Map<string, string>();
      for (const def of schema.features) {
        raw.set(def.id, String(data.get(def.id) ?? ""));
      }
      const built = buildRecord(
        schema,
        String(data.get("subject_id") ?? ""),
        String(data.get("locality_id") ?? ""),
        enrollCounter + 1,
        raw,
      );
      if (!built.record) {
        showFieldErrors(built.errors);
        return;
      }
      enrollCounter += 1;
      try {
        const result = await client.enroll(session.agentId, built.record);
        session.notePrediction(result.prediction);
        root.getElementById("enroll-result")!.innerHTML = scoreCard(
          result.prediction,
        );
        root.getElementById("outlier-slot")!.innerHTML = result.outlier_alert
          ? outlierBanner(result.outlier_alert)
          : "";
        syncModelBadge();
      } catch (err) {
        if (err instanceof GatewayError) {
          showFieldErrors(gatewayErrorToFieldErrors(err.info));
        } else {
          throw err;
        }
      }
    })();
  });

  const incidentForm = root.getElementById("incident-form") as HTMLFormElement;
  let incidentCounter = 0;
  incidentForm.addEventListener("submit", (ev) => {
    ev.preventDefault();
    void (async () => {
      const data = new FormData(incidentForm);
      const sid = String(data.get("subject_id") ?? "").trim();
      const outcome = String(data.get("outcome") ?? "trafficked") as
        | "trafficked"
        | "confirmed-safe";
      const status = root.getElementById("incident-status")!;
      incidentCounter += 1;
      try {
        const result = await client.reportIncident(
          session.agentId,
          sid,
          outcome,
          1000 + incidentCounter,
        );
        session.noteModelVersion(result.model_version);
        status.innerHTML =
          `<span class="ok">recorded; model retrained to ` +
          `v${result.model_version} (${result.alerts.length} alert(s) ` +
          `pending in feed)</span>`;
        syncModelBadge();
      } catch (err) {
        if (err instanceof GatewayError) {
          status.innerHTML = `<span class="toast error">${esc(
            err.info.message,
          )}</span>`;
        } else {
          throw err;
        }
      }
    })();
  });

  const refreshViews = async (): Promise<void> => {
    const clusterSlot = root.getElementById("cluster-slot")!;
    const histSlot = root.getElementById("histogram-slot")!;
    const view = await client.clusterView(session.agentId, 7);
    clusterSlot.innerHTML = view.insufficient
      ? emptyState("not enough subjects for a cluster view")
      : clusterScatter(view.subjects);
    const sim = await client.similarityStats(session.agentId);
    histSlot.innerHTML =
      sim.insufficient || !sim.histogram
        ? emptyState("not enough subjects for similarity analysis")
        : similarityHistogram(sim.histogram);
  };
  root
    .getElementById("refresh-views")!
    .addEventListener("click", () => void refreshViews());

  const showPeers = async (subjectId: string): Promise<void> => {
    const result = await client.peers(session.agentId, subjectId, 5);
    root.getElementById("peers-slot")!.innerHTML = peersPanel(
      subjectId,
      result.peers,
    );
  };
  mount.addEventListener("click", (ev) => {
    const target = ev.target as HTMLElement;
    const link = target.closest("a[href^='#subject/']");
    if (link) {
      ev.preventDefault();
      const sid = decodeURIComponent(
        link.getAttribute("href")!.slice("#subject/".length),
      );
      void showPeers(sid);
    }
  });

  poller.start();
  return { session, poller, refreshViews };
}

declare global {
  interface Window {
    SENTINEL_API?: string;
    SENTINEL_AGENT?: string;
  }
}

if (typeof document !== "undefined" && document.getElementById("console")) {
  const params = new URLSearchParams(window.location.search);
  const api =
    params.get("api") ?? window.SENTINEL_API ?? window.location.origin;
  const agent = params.get("agent") ?? window.SENTINEL_AGENT ?? "agent-1";
  void initApp(document, new GatewayClient(api), { agentId: agent });
}
