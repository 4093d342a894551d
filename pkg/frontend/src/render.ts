/** Pure HTML/SVG builders. Every figure shown comes straight off a gateway
 * payload; the only transforms here are text formatting and pixel scaling.
 * A prediction is never rendered without its model-version badge. */

import type {
  AlertEvent,
  ClusterSubject,
  HistogramBin,
  Peer,
  Prediction,
} from "./types.js";

export function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

const CLUSTER_PALETTE = [
  "#4c78a8", "#f58518", "#54a24b", "#e45756", "#72b7b2",
  "#eeca3b", "#b279a2", "#9d755d",
];

export function scoreCard(pred: Prediction): string {
  const pct = Math.round(pred.alpha * 100);
  const klass = pred.vulnerable ? "vulnerable" : "safe";
  return [
    `<div class="score-card ${klass}" data-subject="${esc(pred.subject_id)}">`,
    `<span class="subject">${esc(pred.subject_id)}</span>`,
    `<span class="score" title="${String(pred.score)}">` +
      `${pred.score.toFixed(3)}</span>`,
    `<span class="class-chip">${klass}</span>`,
    `<span class="model-badge">v${pred.model_version}</span>`,
    `<div class="alpha-gauge" role="meter" aria-valuenow="${pct}">` +
      `<div class="alpha-fill" style="width:${pct}%"></div>` +
      `<span class="alpha-label">learned ${pct}% / heuristic ` +
      `${100 - pct}%</span></div>`,
    `</div>`,
  ].join("");
}

export function outlierBanner(alert: AlertEvent): string {
  const features = alert.detail.features ?? [];
  const items = features
    .map(
      (f) =>
        `<li><code>${esc(f.feature_id)}</code> ` +
        `(${f.deviation.toFixed(1)}&sigma;)</li>`,
    )
    .join("");
  return (
    `<div class="outlier-banner" data-alert="${alert.alert_id}">` +
    `<strong>unusual for this locality</strong> &mdash; subject ` +
    `${esc(alert.subject_id)} deviates on:<ul>${items}</ul></div>`
  );
}

export function feedEntry(alert: AlertEvent): string {
  const when = `t=${alert.timestamp}`;
  if (alert.kind === "ENTERED_DANGER_ZONE") {
    const prev = alert.detail.previous_score;
    const next = alert.detail.new_score;
    const move =
      prev !== undefined && next !== undefined
        ? ` score ${prev.toFixed(3)} &rarr; ${next.toFixed(3)}`
        : "";
    return (
      `<li class="feed-entry danger" data-alert="${alert.alert_id}">` +
      `<a href="#subject/${esc(alert.subject_id)}">` +
      `${esc(alert.subject_id)}</a> entered the danger zone` +
      `${move} <span class="model-badge">v${alert.model_version}</span> ` +
      `<span class="when">${when}</span></li>`
    );
  }
  return (
    `<li class="feed-entry outlier" data-alert="${alert.alert_id}">` +
    `<a href="#subject/${esc(alert.subject_id)}">${esc(alert.subject_id)}</a>` +
    ` flagged as locality outlier ` +
    `<span class="model-badge">v${alert.model_version}</span> ` +
    `<span class="when">${when}</span></li>`
  );
}

export function clusterScatter(
  subjects: ClusterSubject[],
  width = 520,
  height = 360,
): string {
  if (subjects.length === 0) {
    return emptyState("no subjects to plot");
  }
  const xs = subjects.map((s) => s.x);
  const ys = subjects.map((s) => s.y);
  const xMin = Math.min(...xs);
  const xMax = Math.max(...xs);
  const yMin = Math.min(...ys);
  const yMax = Math.max(...ys);
  const pad = 24;
  const sx = (x: number) =>
    xMax === xMin
      ? width / 2
      : pad + ((x - xMin) / (xMax - xMin)) * (width - 2 * pad);
  const sy = (y: number) =>
    yMax === yMin
      ? height / 2
      : height - pad - ((y - yMin) / (yMax - yMin)) * (height - 2 * pad);
  const marks = subjects
    .map((s) => {
      const color = CLUSTER_PALETTE[s.cluster % CLUSTER_PALETTE.length];
      const ring = s.vulnerable ? ' stroke="#b00" stroke-width="2"' : "";
      return (
        `<circle cx="${sx(s.x).toFixed(1)}" cy="${sy(s.y).toFixed(1)}" ` +
        `r="5" fill="${color}"${ring} data-subject="${esc(s.subject_id)}" ` +
        `data-cluster="${s.cluster}"><title>${esc(s.subject_id)} ` +
        `(cluster ${s.cluster})</title></circle>`
      );
    })
    .join("");
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" ` +
    `height="${height}" viewBox="0 0 ${width} ${height}" ` +
    `class="cluster-scatter">${marks}</svg>`
  );
}

export function similarityHistogram(
  bins: HistogramBin[],
  width = 520,
  height = 200,
): string {
  const peak = Math.max(1, ...bins.map((b) => b.count));
  const bar = width / Math.max(bins.length, 1);
  const rects = bins
    .map((b, i) => {
      const h = (b.count / peak) * (height - 30);
      return (
        `<rect x="${(i * bar + 1).toFixed(1)}" ` +
        `y="${(height - 20 - h).toFixed(1)}" width="${(bar - 2).toFixed(1)}" ` +
        `height="${h.toFixed(1)}" fill="#4c78a8">` +
        `<title>[${b.lo.toFixed(2)}, ${b.hi.toFixed(2)}): ${b.count}</title>` +
        `</rect>`
      );
    })
    .join("");
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" ` +
    `height="${height}" viewBox="0 0 ${width} ${height}" ` +
    `class="similarity-histogram">${rects}</svg>`
  );
}

export function peersPanel(subjectId: string, peers: Peer[]): string {
  if (peers.length === 0) {
    return emptyState(`no same-locality peers for ${esc(subjectId)}`);
  }
  const items = peers
    .map(
      (p) =>
        `<li><a href="#subject/${esc(p.subject_id)}">` +
        `${esc(p.subject_id)}</a> <span class="sim">` +
        `${(p.similarity * 100).toFixed(0)}% match</span></li>`,
    )
    .join("");
  return `<ol class="peers">${items}</ol>`;
}

export function emptyState(text: string): string {
  return `<div class="empty-state">${esc(text)}</div>`;
}
