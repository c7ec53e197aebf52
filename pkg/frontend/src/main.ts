/** Single-page workflow: upload, data checks, gated model fitting, result
 * exploration, report download.  Left menu mirrors the analysis steps; every
 * number displayed is fetched from the service. */

import { ApiClient } from "./api.js";
import { renderMapPanel } from "./choropleth.js";
import {
  browserDownload,
  renderReportButton,
  renderRidge,
  renderScatter,
  renderTabulation,
} from "./compare.js";
import { renderModelPanel } from "./panels.js";
import { WorkflowState } from "./state.js";
import { exportSvg } from "./svgexport.js";
import type { FeatureCollection } from "./types.js";

const STEPS = [
  "1. Data upload",
  "2. Data checks",
  "3. Model fitting",
  "4. Result visualization",
  "5. Report",
];

export function mountApp(root: HTMLElement, api = new ApiClient()): void {
  const state = new WorkflowState();
  let geometry: FeatureCollection | null = null;
  let geometryText = "";

  root.textContent = "";
  const menu = document.createElement("nav");
  const content = document.createElement("main");
  root.append(menu, content);

  const sections = new Map<string, HTMLElement>();
  for (const step of STEPS) {
    const link = document.createElement("button");
    link.textContent = step;
    link.addEventListener("click", () => show(step));
    menu.appendChild(link);
    const section = document.createElement("section");
    section.dataset.step = step;
    section.style.display = "none";
    content.appendChild(section);
    sections.set(step, section);
  }

  function show(step: string): void {
    for (const [name, section] of sections) {
      section.style.display = name === step ? "block" : "none";
    }
  }

  // -- step 1: upload --------------------------------------------------------
  const upload = sections.get(STEPS[0])!;
  upload.innerHTML = `
    <h2>Upload analysis dataset</h2>
    <label>dataset CSV <input type="file" id="f-dataset"></label>
    <label>geometry JSON <input type="file" id="f-geometry"></label>
    <label>reference estimate <input type="number" id="f-reference" step="0.01" min="0" max="1"></label>
    <button id="do-upload">Load data</button>
    <p id="upload-status"></p>`;
  upload.querySelector("#do-upload")!.addEventListener("click", () => {
    void (async () => {
      const dataset = (upload.querySelector("#f-dataset") as HTMLInputElement).files?.[0];
      const geomFile = (upload.querySelector("#f-geometry") as HTMLInputElement).files?.[0];
      const status = upload.querySelector("#upload-status") as HTMLElement;
      if (!dataset || !geomFile) {
        status.textContent = "both files are required";
        return;
      }
      const reference = (upload.querySelector("#f-reference") as HTMLInputElement).value;
      try {
        const created = await api.createDataset({
          dataset,
          geometry: geomFile,
          referenceEstimate: reference ? Number(reference) : undefined,
        });
        geometryText = await geomFile.text();
        geometry = JSON.parse(geometryText) as FeatureCollection;
        state.bindDataset(created.dataset_id, created.levels);
        status.textContent = `loaded dataset ${created.dataset_id} (levels ${created.levels.join(", ")})`;
        await refreshChecks();
        show(STEPS[1]);
      } catch (err) {
        status.textContent = String(err);
      }
    })();
  });

  // -- step 2: data checks -----------------------------------------------------
  const checks = sections.get(STEPS[1])!;

  async function refreshChecks(): Promise<void> {
    if (!state.datasetId) return;
    checks.textContent = "";
    const h = document.createElement("h2");
    h.textContent = "Consistency and cluster counts";
    checks.appendChild(h);
    const consistency = await api.consistency(state.datasetId);
    const p = document.createElement("p");
    p.textContent =
      consistency.status === "no_reference"
        ? "No official reference estimate supplied."
        : `National estimate ${consistency.computed?.toPrecision(4)} vs reference ` +
          `${consistency.reference} within ${consistency.tolerance}: ${consistency.status}`;
    checks.appendChild(p);
    for (const level of state.levels.filter((l) => l >= 1)) {
      const counts = await api.clusters(state.datasetId, level);
      const div = document.createElement("p");
      const totals = Object.values(counts.areas);
      const clusters = totals.reduce((acc, c) => acc + c.n_clusters, 0);
      const empty = totals.filter((c) => c.n_clusters === 0).length;
      div.textContent = `level ${level}: ${clusters} clusters over ${totals.length} areas (${empty} empty)`;
      checks.appendChild(div);
    }
    await refreshFitting();
  }

  // -- step 3: fitting ----------------------------------------------------------
  const fitting = sections.get(STEPS[2])!;

  async function refreshFitting(): Promise<void> {
    if (!state.datasetId) return;
    fitting.textContent = "";
    for (const level of state.levels.filter((l) => l >= 1)) {
      const head = document.createElement("h3");
      head.textContent = `Admin level ${level}`;
      fitting.appendChild(head);
      const gate = await api.gate(state.datasetId, level);
      const host = document.createElement("div");
      fitting.appendChild(host);
      const panel = renderModelPanel(host, state, gate, (body) => {
        void (async () => {
          const outcome = await api.requestFit(body);
          if (outcome.kind === "refused") {
            panel.showRefusal(outcome.refusal);
            return;
          }
          state.trackJob(outcome.job.job_id, body.method, body.level);
          await pollJob(outcome.job.job_id);
        })();
      });
    }
  }

  async function pollJob(jobId: string): Promise<void> {
    for (;;) {
      const job = await api.job(jobId);
      state.updateJob(jobId, job.status);
      if (job.status === "done") {
        await refreshResults();
        show(STEPS[3]);
        return;
      }
      if (job.status === "failed") return;
      await new Promise((resolve) => setTimeout(resolve, 400));
    }
  }

  // -- step 4: results ------------------------------------------------------------
  const results = sections.get(STEPS[3])!;

  async function refreshResults(): Promise<void> {
    results.textContent = "";
    const done = state.completedFits();
    if (!done.length || !geometry) return;
    const latest = done[done.length - 1];
    const resp = await api.summaries(latest.jobId);
    const mapHost = document.createElement("div");
    results.appendChild(mapHost);
    const panel = renderMapPanel(mapHost, api, latest.jobId, geometry, resp.summaries);

    const exportBtn = document.createElement("button");
    exportBtn.textContent = "static view (SVG)";
    exportBtn.addEventListener("click", () => {
      if (panel.view.svg) exportSvg(panel.view.svg, `map-${latest.jobId}.svg`);
    });
    results.appendChild(exportBtn);

    const sameLevel = done.filter((f) => f.level === latest.level);
    if (sameLevel.length >= 2) {
      const [a, b] = sameLevel.slice(-2);
      const data = await api.compare(a.jobId, b.jobId, "cv");
      const scatterHost = document.createElement("div");
      results.appendChild(scatterHost);
      renderScatter(scatterHost, data);
    }
    if (latest.method !== "direct") {
      const sel = latest.level === 1 ? "all_level1" : "top_bottom:5";
      const ridge = await api.ridge(latest.jobId, sel);
      const ridgeHost = document.createElement("div");
      results.appendChild(ridgeHost);
      renderRidge(ridgeHost, ridge);
    }
    const csv = await api.tabulation(latest.jobId);
    const tabHost = document.createElement("div");
    results.appendChild(tabHost);
    renderTabulation(tabHost, api, latest.jobId, csv, 10, browserDownload);
    await refreshReport();
  }

  // -- step 5: report ----------------------------------------------------------------
  const reportSection = sections.get(STEPS[4])!;

  async function refreshReport(): Promise<void> {
    reportSection.textContent = "";
    const head = document.createElement("h2");
    head.textContent = "Report";
    reportSection.appendChild(head);
    renderReportButton(
      reportSection,
      api,
      () => state.completedFits().map((f) => f.jobId),
      () => state.threshold,
    );
  }

  show(STEPS[0]);
}

declare global {
  interface Window {
    mountSaeprevApp?: (root: HTMLElement) => void;
  }
}

if (typeof window !== "undefined") {
  window.mountSaeprevApp = (root: HTMLElement) => mountApp(root);
  const auto = document.getElementById("app");
  if (auto) mountApp(auto);
}
