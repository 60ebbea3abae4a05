/** DOM wiring: triage queue first, inspection views below. Every view is a
 * pure render of the latest API responses; mutations trigger a refetch. */

import { ApiError, isRetryableConflict, ReviewApi } from "./api.js";
import { categoryColor, extent, linearScale, polylinePoints, ribbonSegments } from "./charts.js";
import { anomalyDisplayText, canAddAlias, groupByPrompt, queueSummary } from "./triage.js";
import type { GazeFeed, MetricsFeed, OpenAnomaly, SyncFeed } from "./types.js";

const SVG_NS = "http://www.w3.org/2000/svg";
const api = new ReviewApi();

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function svgEl(tag: string, attrs: Record<string, string | number>): SVGElement {
  const node = document.createElementNS(SVG_NS, tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, String(value));
  }
  return node;
}

// ---------------------------------------------------------------------------
// Notices: API failures surface inline with a retry hook.

const noticeArea = el("div", "notices");

function showNotice(message: string, retry?: () => void, kind: "error" | "info" = "error"): void {
  const box = el("div", `notice notice-${kind}`);
  box.appendChild(el("span", "", message));
  if (retry) {
    const button = el("button", "", "retry");
    button.onclick = () => {
      box.remove();
      retry();
    };
    box.appendChild(button);
  }
  const close = el("button", "", "x");
  close.onclick = () => box.remove();
  box.appendChild(close);
  noticeArea.appendChild(box);
}

function describeError(error: unknown): string {
  if (error instanceof ApiError) {
    return error.status === 0 ? error.message : `HTTP ${error.status}: ${error.message}`;
  }
  return String(error);
}

// ---------------------------------------------------------------------------
// Triage queue

const queueStatus = el("span", "queue-status");
const triageList = el("div", "triage-list");

async function refreshQueue(): Promise<void> {
  try {
    const { anomalies } = await api.getAnomalies();
    renderQueue(anomalies);
  } catch (error) {
    if (error instanceof ApiError && error.status === 404) {
      queueStatus.textContent = "no annotation run in this state directory";
      triageList.replaceChildren(el("p", "empty", "Nothing to review."));
      return;
    }
    showNotice(`loading anomalies failed: ${describeError(error)}`, refreshQueue);
  }
}

function renderQueue(anomalies: OpenAnomaly[]): void {
  queueStatus.textContent = queueSummary(anomalies);
  triageList.replaceChildren();
  if (anomalies.length === 0) {
    triageList.appendChild(el("p", "empty", "Queue empty. Renormalize to apply pending resolutions."));
    return;
  }
  for (const group of groupByPrompt(anomalies)) {
    const section = el("section", "prompt-group");
    section.appendChild(el("h3", "", group.promptId));
    for (const anomaly of group.items) {
      section.appendChild(renderCard(anomaly));
    }
    triageList.appendChild(section);
  }
}

function renderCard(anomaly: OpenAnomaly): HTMLElement {
  const card = el("article", "anomaly-card");
  card.appendChild(el("div", "clip-id", anomaly.clip_id));
  const raw = el("pre", "raw-response");
  raw.textContent = anomalyDisplayText(anomaly);
  card.appendChild(raw);

  const actions = el("div", "actions");
  for (const option of anomaly.options) {
    const row = el("div", "action-row");
    row.appendChild(el("span", "option-name", option));
    const resolveBtn = el("button", "", "resolve");
    resolveBtn.title = "resolve this one cell";
    resolveBtn.onclick = () => mutate(() => api.resolveToOption(anomaly.anomaly_id, option));
    row.appendChild(resolveBtn);
    if (canAddAlias(anomaly)) {
      const aliasBtn = el("button", "", "add as alias");
      aliasBtn.title = "also map this wording onto the option for future runs";
      aliasBtn.onclick = () => mutate(() => api.resolveAsAlias(anomaly.anomaly_id, option));
      row.appendChild(aliasBtn);
    }
    actions.appendChild(row);
  }
  const dismissRow = el("div", "action-row");
  const dismissBtn = el("button", "dismiss", "dismiss");
  dismissBtn.onclick = () => mutate(() => api.dismiss(anomaly.anomaly_id));
  dismissRow.appendChild(dismissBtn);
  actions.appendChild(dismissRow);
  card.appendChild(actions);
  return card;
}

async function mutate(action: () => Promise<unknown>): Promise<void> {
  try {
    await action();
  } catch (error) {
    showNotice(`mutation failed: ${describeError(error)}`);
    return;
  }
  await refreshQueue();
}

async function runRenormalize(): Promise<void> {
  try {
    const counts = await api.renormalize();
    showNotice(`renormalized: ${counts.resolved} resolved, ${counts.still_open} still open`, undefined, "info");
  } catch (error) {
    if (isRetryableConflict(error)) {
      showNotice("another renormalize is in progress", runRenormalize);
    } else {
      showNotice(`renormalize failed: ${describeError(error)}`);
    }
    return;
  }
  await Promise.all([refreshQueue(), refreshInspect()]);
}

// ---------------------------------------------------------------------------
// Inspection views

const sessionSelect = el("select");
const metricsSelect = el("select");
const gazeSelect = el("select");
const syncChart = el("div", "chart");
const metricsChart = el("div", "chart");
const gazeChart = el("div", "chart");

const CHART_W = 760;
const CHART_H = 180;
const PAD = 36;

function renderSyncChart(feed: SyncFeed): void {
  syncChart.replaceChildren();
  const streams = Object.keys(feed.curves).sort();
  if (streams.length === 0) {
    syncChart.appendChild(el("p", "empty", "No correlation curves dumped for this session."));
    return;
  }
  const allLags = streams.flatMap((s) => feed.curves[s]!.map((p) => p[0]));
  const allCorr = streams.flatMap((s) => feed.curves[s]!.map((p) => p[1]));
  const [x0, x1] = extent(allLags);
  const [y0, y1] = extent(allCorr);
  const sx = linearScale(x0, x1, PAD, CHART_W - 8);
  const sy = linearScale(y0, y1, CHART_H - 20, 8);
  const svg = svgEl("svg", { viewBox: `0 0 ${CHART_W} ${CHART_H}`, class: "plot" });
  svg.appendChild(svgEl("line", { x1: PAD, y1: CHART_H - 20, x2: CHART_W - 8, y2: CHART_H - 20, class: "axis" }));
  streams.forEach((stream, i) => {
    const pts = feed.curves[stream]!;
    const polyline = svgEl("polyline", {
      points: polylinePoints(
        pts.map((p) => p[0]),
        pts.map((p) => p[1]),
        sx,
        sy,
      ),
      fill: "none",
      stroke: ["#4c78a8", "#f58518", "#54a24b", "#e45756"][i % 4]!,
      "stroke-width": 1,
    });
    svg.appendChild(polyline);
    const offset = feed.report.offsets_s[stream];
    if (offset !== undefined) {
      svg.appendChild(
        svgEl("line", { x1: sx(offset), y1: 8, x2: sx(offset), y2: CHART_H - 20, class: "peak-marker" }),
      );
    }
    const label = svgEl("text", { x: PAD + 4, y: 16 + i * 14, class: "legend" });
    label.textContent = `${feed.report.reference_stream} vs ${stream} (offset ${offset?.toFixed(3) ?? "?"} s)`;
    svg.appendChild(label);
  });
  syncChart.appendChild(svg);
}

function renderMetricsChart(feed: MetricsFeed): void {
  metricsChart.replaceChildren();
  if (feed.rows.length === 0) {
    metricsChart.appendChild(el("p", "empty", "Empty quality report."));
    return;
  }
  const frames = feed.rows.map((r) => r.frame);
  const [f0, f1] = extent(frames);
  const sx = linearScale(f0, f1, PAD, CHART_W - 8);
  const series: [string, (number | null)[], string][] = [
    ["IFC", feed.rows.map((r) => r.ifc), "#4c78a8"],
    ["BR", feed.rows.map((r) => r.br), "#f58518"],
    ["OS", feed.rows.map((r) => r.os), "#54a24b"],
  ];
  const svg = svgEl("svg", { viewBox: `0 0 ${CHART_W} ${CHART_H}`, class: "plot" });
  const sy = linearScale(0, 1, CHART_H - 20, 8);
  svg.appendChild(svgEl("line", { x1: PAD, y1: CHART_H - 20, x2: CHART_W - 8, y2: CHART_H - 20, class: "axis" }));
  series.forEach(([name, values, color], i) => {
    svg.appendChild(
      svgEl("polyline", {
        points: polylinePoints(frames, values, sx, sy),
        fill: "none",
        stroke: color,
        "stroke-width": 1,
      }),
    );
    const label = svgEl("text", { x: PAD + 4, y: 16 + i * 14, class: "legend", fill: color });
    const mean =
      name === "IFC" ? feed.temporal_means.ifc : name === "BR" ? feed.temporal_means.br : feed.temporal_means.os;
    label.textContent = `${name} (mean ${mean === null ? "n/a" : mean.toFixed(4)})`;
    svg.appendChild(label);
  });
  metricsChart.appendChild(svg);
}

function renderGazeChart(feed: GazeFeed): void {
  gazeChart.replaceChildren();
  if (feed.rows.length === 0) {
    gazeChart.appendChild(el("p", "empty", "Empty trajectory."));
    return;
  }
  const segments = ribbonSegments(feed.rows);
  const t0 = segments[0]!.startNs;
  const t1 = segments[segments.length - 1]!.endNs;
  const sx = linearScale(t0, t1, PAD, CHART_W - 8);
  const ribbonH = 42;
  const svg = svgEl("svg", { viewBox: `0 0 ${CHART_W} ${ribbonH + 40}`, class: "plot" });
  for (const segment of segments) {
    const rect = svgEl("rect", {
      x: sx(segment.startNs),
      y: 8,
      width: Math.max(sx(segment.endNs) - sx(segment.startNs), 0.5),
      height: ribbonH,
      fill: categoryColor(segment.target, feed.objects),
    });
    const title = document.createElementNS(SVG_NS, "title");
    title.textContent = `${segment.target} [${(segment.startNs / 1e9).toFixed(3)} s - ${(
      segment.endNs / 1e9
    ).toFixed(3)} s]`;
    rect.appendChild(title);
    svg.appendChild(rect);
  }
  const legendTargets = ["background", "off_frame", "no_frame", ...feed.objects];
  legendTargets.forEach((target, i) => {
    const x = PAD + i * 110;
    svg.appendChild(svgEl("rect", { x, y: ribbonH + 18, width: 10, height: 10, fill: categoryColor(target, feed.objects) }));
    const label = svgEl("text", { x: x + 14, y: ribbonH + 27, class: "legend" });
    label.textContent = target;
    svg.appendChild(label);
  });
  gazeChart.appendChild(svg);
}

async function refreshInspect(): Promise<void> {
  const session = sessionSelect.value;
  const metricsStream = metricsSelect.value;
  const gazeStream = gazeSelect.value;
  const loaders: Promise<void>[] = [];
  if (session) {
    loaders.push(
      api
        .getSync(session)
        .then(renderSyncChart)
        .catch((error) => showNotice(`sync view failed: ${describeError(error)}`, refreshInspect)),
    );
  } else {
    syncChart.replaceChildren(el("p", "empty", "No sync report in this state directory."));
  }
  if (metricsStream) {
    loaders.push(
      api
        .getMetrics(metricsStream)
        .then(renderMetricsChart)
        .catch((error) => showNotice(`metrics view failed: ${describeError(error)}`, refreshInspect)),
    );
  } else {
    metricsChart.replaceChildren(el("p", "empty", "No quality reports in this state directory."));
  }
  if (gazeStream) {
    loaders.push(
      api
        .getGaze(gazeStream)
        .then(renderGazeChart)
        .catch((error) => showNotice(`gaze view failed: ${describeError(error)}`, refreshInspect)),
    );
  } else {
    gazeChart.replaceChildren(el("p", "empty", "No trajectories in this state directory."));
  }
  await Promise.all(loaders);
}

function fillSelect(select: HTMLSelectElement, values: string[]): void {
  select.replaceChildren();
  for (const value of values) {
    const option = el("option", "", value);
    option.value = value;
    select.appendChild(option);
  }
  select.disabled = values.length === 0;
}

// ---------------------------------------------------------------------------
// Page assembly

function install(): void {
  const app = document.querySelector("#app");
  if (!app) throw new Error("missing #app container");

  const header = el("header");
  header.appendChild(el("h1", "", "gazekit review"));
  header.appendChild(queueStatus);
  const renormalizeBtn = el("button", "renormalize", "renormalize");
  renormalizeBtn.onclick = runRenormalize;
  header.appendChild(renormalizeBtn);
  app.appendChild(header);
  app.appendChild(noticeArea);

  const triage = el("section", "panel");
  triage.appendChild(el("h2", "", "Triage"));
  triage.appendChild(triageList);
  app.appendChild(triage);

  const inspect = el("section", "panel");
  inspect.appendChild(el("h2", "", "Inspect"));
  const controls = el("div", "controls");
  controls.append("session: ", sessionSelect, " metrics: ", metricsSelect, " gaze: ", gazeSelect);
  inspect.appendChild(controls);
  inspect.appendChild(el("h4", "", "Correlation curves"));
  inspect.appendChild(syncChart);
  inspect.appendChild(el("h4", "", "Segmentation quality timelines"));
  inspect.appendChild(metricsChart);
  inspect.appendChild(el("h4", "", "Gaze-target ribbon"));
  inspect.appendChild(gazeChart);
  app.appendChild(inspect);

  for (const select of [sessionSelect, metricsSelect, gazeSelect]) {
    select.onchange = refreshInspect;
  }

  void bootstrap();
}

async function bootstrap(): Promise<void> {
  try {
    const index = await api.getIndex();
    fillSelect(sessionSelect, index.sessions);
    fillSelect(metricsSelect, index.metrics);
    fillSelect(gazeSelect, index.gaze);
  } catch (error) {
    showNotice(`loading index failed: ${describeError(error)}`, bootstrap);
  }
  await Promise.all([refreshQueue(), refreshInspect()]);
}

install();
