/** Comparison views: scatter with diagonal reference, ridge curves, paged
 * tabulation with download, and the report download button.  Downloads are
 * exact passthroughs of service responses. */

import type { ApiClient } from "./api.js";
import type { CompareResponse, RidgeResponse } from "./types.js";

const SVG_NS = "http://www.w3.org/2000/svg";

function svgEl<K extends keyof SVGElementTagNameMap>(tag: K): SVGElementTagNameMap[K] {
  return document.createElementNS(SVG_NS, tag);
}

export type DownloadSink = (filename: string, content: string, mime: string) => void;

export function browserDownload(filename: string, content: string, mime: string): void {
  const blob = new Blob([content], { type: mime });
  const url = URL.createObjectURL(blob);
  const a = document.createElement("a");
  a.href = url;
  a.download = filename;
  a.click();
  URL.revokeObjectURL(url);
}

export interface ScatterView {
  element: HTMLElement;
  svg: SVGSVGElement;
  pointCount: number;
}

export function renderScatter(container: HTMLElement, data: CompareResponse): ScatterView {
  container.textContent = "";
  const size = 420;
  const pad = 40;
  const root = document.createElement("div");
  root.className = "scatter";
  const svg = svgEl("svg");
  svg.setAttribute("viewBox", `0 0 ${size} ${size}`);
  svg.setAttribute("width", String(size));
  svg.setAttribute("height", String(size));

  const values = data.pairs.flatMap((p) => [p.a, p.b]);
  const lo = values.length ? Math.min(...values) : 0;
  const hi = values.length ? Math.max(...values) : 1;
  const span = hi > lo ? hi - lo : 1;
  const toX = (v: number) => pad + ((v - lo) / span) * (size - 2 * pad);
  const toY = (v: number) => size - pad - ((v - lo) / span) * (size - 2 * pad);

  const diagonal = svgEl("line");
  diagonal.setAttribute("class", "diagonal");
  diagonal.setAttribute("x1", String(toX(lo)));
  diagonal.setAttribute("y1", String(toY(lo)));
  diagonal.setAttribute("x2", String(toX(hi)));
  diagonal.setAttribute("y2", String(toY(hi)));
  diagonal.setAttribute("stroke", "#888");
  diagonal.setAttribute("stroke-dasharray", "4 3");
  svg.appendChild(diagonal);

  for (const pair of data.pairs) {
    const dot = svgEl("circle");
    dot.setAttribute("cx", String(toX(pair.a)));
    dot.setAttribute("cy", String(toY(pair.b)));
    dot.setAttribute("r", "4");
    dot.setAttribute("fill", "#2a6f97");
    dot.setAttribute("data-area", pair.area_id);
    const title = svgEl("title");
    title.textContent = `${pair.area_id}: ${data.method_a}=${pair.a.toPrecision(4)}, ${data.method_b}=${pair.b.toPrecision(4)}`;
    dot.appendChild(title);
    svg.appendChild(dot);
  }

  const caption = document.createElement("p");
  caption.textContent = `${data.stat}: ${data.method_a} (x) vs ${data.method_b} (y)`;
  root.appendChild(svg);
  root.appendChild(caption);
  container.appendChild(root);
  return { element: root, svg, pointCount: data.pairs.length };
}

export interface RidgeView {
  element: HTMLElement;
  svg: SVGSVGElement;
  curveCount: number;
  order: string[];
}

export function renderRidge(container: HTMLElement, data: RidgeResponse): RidgeView {
  container.textContent = "";
  const width = 520;
  const rowHeight = 46;
  const overlap = 1.6;
  const height = rowHeight * (data.curves.length + 1);
  const root = document.createElement("div");
  root.className = "ridge";
  const svg = svgEl("svg");
  svg.setAttribute("viewBox", `0 0 ${width} ${height}`);
  svg.setAttribute("width", String(width));
  svg.setAttribute("height", String(height));

  data.curves.forEach((curve, i) => {
    const base = (i + 1) * rowHeight;
    const peak = Math.max(...curve.density, 1e-12);
    const pts = curve.grid.map((x, k) => {
      const px = 60 + x * (width - 80);
      const py = base - (curve.density[k] / peak) * rowHeight * overlap * 0.55;
      return `${px.toFixed(1)},${py.toFixed(1)}`;
    });
    const path = svgEl("path");
    path.setAttribute(
      "d",
      `M60,${base}L${pts.join("L")}L${60 + (width - 80)},${base}Z`,
    );
    path.setAttribute("fill", "rgba(42,111,151,0.55)");
    path.setAttribute("stroke", "#2a6f97");
    path.setAttribute("data-area", curve.area_id);
    svg.appendChild(path);
    const label = svgEl("text");
    label.setAttribute("x", "4");
    label.setAttribute("y", String(base - 4));
    label.setAttribute("font-size", "11");
    label.textContent = curve.area_id;
    svg.appendChild(label);
  });

  if (data.note) {
    const note = document.createElement("p");
    note.textContent = data.note;
    root.appendChild(note);
  }
  root.appendChild(svg);
  container.appendChild(root);
  return {
    element: root,
    svg,
    curveCount: data.curves.length,
    order: data.curves.map((c) => c.area_id),
  };
}

export interface TabulationView {
  element: HTMLElement;
  table: HTMLTableElement;
  page: number;
  pageCount: number;
  setPage(page: number): void;
  /** Fetches the CSV and hands the exact bytes to the sink. */
  download(): Promise<string>;
}

export function renderTabulation(
  container: HTMLElement,
  api: ApiClient,
  fitId: string,
  csvText: string,
  pageSize = 10,
  sink: DownloadSink = browserDownload,
): TabulationView {
  container.textContent = "";
  const root = document.createElement("div");
  root.className = "tabulation";
  const lines = csvText.trim().split("\n");
  const header = lines[0].split(",");
  const rows = lines.slice(1).map((line) => line.split(","));
  const pageCount = Math.max(1, Math.ceil(rows.length / pageSize));

  const table = document.createElement("table");
  const pager = document.createElement("div");
  pager.className = "pager";
  const status = document.createElement("span");
  let page = 0;

  function paint(): void {
    table.textContent = "";
    const head = table.createTHead().insertRow();
    for (const col of header) {
      const th = document.createElement("th");
      th.textContent = col;
      head.appendChild(th);
    }
    const body = table.createTBody();
    for (const row of rows.slice(page * pageSize, (page + 1) * pageSize)) {
      const tr = body.insertRow();
      for (const cell of row) tr.insertCell().textContent = cell;
    }
    status.textContent = `page ${page + 1} of ${pageCount}`;
  }

  const prev = document.createElement("button");
  prev.textContent = "prev";
  prev.addEventListener("click", () => view.setPage(page - 1));
  const next = document.createElement("button");
  next.textContent = "next";
  next.addEventListener("click", () => view.setPage(page + 1));
  const download = document.createElement("button");
  download.className = "download";
  download.textContent = "download CSV";
  download.addEventListener("click", () => {
    void view.download();
  });
  pager.append(prev, status, next, download);

  const view: TabulationView = {
    element: root,
    table,
    get page() {
      return page;
    },
    pageCount,
    setPage(p: number) {
      page = Math.min(Math.max(p, 0), pageCount - 1);
      paint();
    },
    async download() {
      // refetch so the file is exactly the service response, byte for byte
      const text = await api.tabulation(fitId);
      sink(`tabulation-${fitId}.csv`, text, "text/csv");
      return text;
    },
  };
  paint();
  root.appendChild(pager);
  root.appendChild(table);
  container.appendChild(root);
  return view;
}

export function renderReportButton(
  container: HTMLElement,
  api: ApiClient,
  fitIds: () => string[],
  p0: () => number | undefined,
  sink: DownloadSink = browserDownload,
): { element: HTMLButtonElement; generate(): Promise<string> } {
  const button = document.createElement("button");
  button.className = "report";
  button.textContent = "Generate report";
  const generate = async () => {
    const report = await api.report(fitIds(), p0());
    const text = JSON.stringify(report, null, 2);
    sink("report.json", text, "application/json");
    return text;
  };
  button.addEventListener("click", () => {
    void generate();
  });
  container.appendChild(button);
  return { element: button, generate };
}
