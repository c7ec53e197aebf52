/** Interactive choropleth of per-area statistics.
 *
 * All values come from fetched summaries (the view computes nothing);
 * areas flagged no_data/low_information/extrapolated are hatched, hovering
 * reveals every summary field, and the exceedance view recolors in place
 * from the exceedance endpoint.  When geometry is missing the panel falls
 * back to a plain table.
 */

import { makeScale } from "./color.js";
import type { ApiClient } from "./api.js";
import type { AreaSummary, FeatureCollection, Stat } from "./types.js";
import { STAT_LABELS } from "./types.js";

const SVG_NS = "http://www.w3.org/2000/svg";
const VIEW_W = 640;
const VIEW_H = 480;

function svgEl<K extends keyof SVGElementTagNameMap>(tag: K): SVGElementTagNameMap[K] {
  return document.createElementNS(SVG_NS, tag);
}

type Ring = Array<[number, number]>;

function rings(geometry: { type: string; coordinates: unknown } | null): Ring[] {
  if (!geometry) return [];
  if (geometry.type === "Polygon") {
    return (geometry.coordinates as number[][][]).map(
      (ring) => ring.map(([x, y]) => [x, y] as [number, number]),
    );
  }
  if (geometry.type === "MultiPolygon") {
    return (geometry.coordinates as number[][][][]).flatMap((poly) =>
      poly.map((ring) => ring.map(([x, y]) => [x, y] as [number, number])),
    );
  }
  return [];
}

function planarTransform(all: Ring[]): (pt: [number, number]) => [number, number] {
  let minX = Infinity, minY = Infinity, maxX = -Infinity, maxY = -Infinity;
  for (const ring of all) {
    for (const [x, y] of ring) {
      minX = Math.min(minX, x); maxX = Math.max(maxX, x);
      minY = Math.min(minY, y); maxY = Math.max(maxY, y);
    }
  }
  const pad = 10;
  const scale = Math.min(
    (VIEW_W - 2 * pad) / Math.max(maxX - minX, 1e-9),
    (VIEW_H - 2 * pad) / Math.max(maxY - minY, 1e-9),
  );
  return ([x, y]) => [pad + (x - minX) * scale, VIEW_H - pad - (y - minY) * scale];
}

function pathFor(geomRings: Ring[], tf: (pt: [number, number]) => [number, number]): string {
  return geomRings
    .map((ring) => {
      const pts = ring.map(tf).map(([x, y]) => `${x.toFixed(2)},${y.toFixed(2)}`);
      return `M${pts.join("L")}Z`;
    })
    .join("");
}

export function statValue(summary: AreaSummary, stat: Stat): number | null {
  switch (stat) {
    case "point": return summary.point;
    case "ci_width": return summary.ci_width;
    case "cv": return summary.cv;
    case "exceedance": return summary.exceedance;
  }
}

export interface ChoroplethView {
  kind: "map" | "table";
  element: HTMLElement;
  svg: SVGSVGElement | null;
  /** Current stat shown by the view. */
  stat: Stat;
  /** Repaint with a new statistic taken from the stored summaries. */
  setStat(stat: Stat): void;
  /** Repaint the same stat from an explicit per-area value map. */
  recolor(values: Record<string, number | null>, stat: Stat): void;
  legendLabel(): string;
  hovered(): AreaSummary | null;
}

export function renderChoropleth(
  container: HTMLElement,
  geometry: FeatureCollection,
  summaries: AreaSummary[],
  stat: Stat = "point",
): ChoroplethView {
  container.textContent = "";
  const byArea = new Map(summaries.map((s) => [s.area_id, s]));
  const level = summaries[0]?.level;
  const features = geometry.features.filter((f) => f.properties.level === level);
  const missingGeometry =
    features.length === 0 || features.some((f) => !f.geometry) ||
    features.length !== summaries.length;

  if (missingGeometry) {
    return renderFallbackTable(container, summaries, stat);
  }

  const root = document.createElement("div");
  root.className = "choropleth";
  const svg = svgEl("svg");
  svg.setAttribute("viewBox", `0 0 ${VIEW_W} ${VIEW_H}`);
  svg.setAttribute("width", String(VIEW_W));
  svg.setAttribute("height", String(VIEW_H));

  const defs = svgEl("defs");
  const pattern = svgEl("pattern");
  pattern.setAttribute("id", "hatch");
  pattern.setAttribute("width", "6");
  pattern.setAttribute("height", "6");
  pattern.setAttribute("patternUnits", "userSpaceOnUse");
  pattern.setAttribute("patternTransform", "rotate(45)");
  const line = svgEl("line");
  line.setAttribute("x1", "0"); line.setAttribute("y1", "0");
  line.setAttribute("x2", "0"); line.setAttribute("y2", "6");
  line.setAttribute("stroke", "#555");
  line.setAttribute("stroke-width", "1.6");
  pattern.appendChild(line);
  defs.appendChild(pattern);
  svg.appendChild(defs);

  const allRings = features.flatMap((f) => rings(f.geometry));
  const tf = planarTransform(allRings);

  const tooltip = document.createElement("div");
  tooltip.className = "tooltip";
  tooltip.style.display = "none";

  const legend = document.createElement("div");
  legend.className = "legend";

  let currentStat: Stat = stat;
  let hoveredSummary: AreaSummary | null = null;
  const paths = new Map<string, { fill: SVGPathElement; hatch: SVGPathElement }>();

  for (const feat of features) {
    const aid = feat.properties.id;
    const d = pathFor(rings(feat.geometry), tf);
    const fill = svgEl("path");
    fill.setAttribute("d", d);
    fill.setAttribute("stroke", "#fff");
    fill.setAttribute("stroke-width", "0.8");
    fill.setAttribute("data-area", aid);
    const hatch = svgEl("path");
    hatch.setAttribute("d", d);
    hatch.setAttribute("fill", "none");
    hatch.setAttribute("pointer-events", "none");
    fill.addEventListener("mouseenter", () => {
      const s = byArea.get(aid) ?? null;
      hoveredSummary = s;
      if (s) {
        tooltip.style.display = "block";
        tooltip.textContent = describeSummary(s);
      }
    });
    fill.addEventListener("mouseleave", () => {
      hoveredSummary = null;
      tooltip.style.display = "none";
    });
    svg.appendChild(fill);
    svg.appendChild(hatch);
    paths.set(aid, { fill, hatch });
  }

  function paint(values: Record<string, number | null>, stat: Stat): void {
    currentStat = stat;
    const numeric = Object.values(values).filter((v): v is number => v !== null);
    const scale = makeScale(numeric.length ? numeric : [0, 1]);
    for (const [aid, { fill, hatch }] of paths) {
      const value = values[aid] ?? null;
      const summary = byArea.get(aid);
      if (value === null || value === undefined) {
        fill.setAttribute("fill", "#e5e5e5");
        hatch.setAttribute("fill", "url(#hatch)");
      } else {
        fill.setAttribute("fill", scale.toColor(value));
        hatch.setAttribute(
          "fill",
          summary && summary.flags.length ? "url(#hatch)" : "none",
        );
      }
    }
    legend.textContent =
      `${STAT_LABELS[stat]}: ${scale.min.toPrecision(3)} to ${scale.max.toPrecision(3)}`;
  }

  function valuesFromSummaries(stat: Stat): Record<string, number | null> {
    const out: Record<string, number | null> = {};
    for (const s of summaries) out[s.area_id] = statValue(s, stat);
    return out;
  }

  paint(valuesFromSummaries(stat), stat);
  root.appendChild(svg);
  root.appendChild(legend);
  root.appendChild(tooltip);
  container.appendChild(root);

  return {
    kind: "map",
    element: root,
    svg,
    get stat() {
      return currentStat;
    },
    setStat(next: Stat) {
      paint(valuesFromSummaries(next), next);
    },
    recolor(values: Record<string, number | null>, stat: Stat) {
      paint(values, stat);
    },
    legendLabel() {
      return legend.textContent ?? "";
    },
    hovered() {
      return hoveredSummary;
    },
  };
}

export function describeSummary(s: AreaSummary): string {
  const fmt = (v: number | null) => (v === null ? "-" : v.toPrecision(4));
  const parts = [
    `area ${s.area_id}`,
    `method ${s.method}`,
    `point ${fmt(s.point)}`,
    `95% CI [${fmt(s.ci_low)}, ${fmt(s.ci_high)}]`,
    `width ${fmt(s.ci_width)}`,
    `cv ${fmt(s.cv)}`,
    `exceedance ${fmt(s.exceedance)}`,
    `flags ${s.flags.length ? s.flags.join(";") : "none"}`,
  ];
  if (s.seed !== null) parts.push(`seed ${s.seed}`);
  return parts.join(" | ");
}

function renderFallbackTable(
  container: HTMLElement,
  summaries: AreaSummary[],
  stat: Stat,
): ChoroplethView {
  const root = document.createElement("div");
  root.className = "choropleth-fallback";
  const note = document.createElement("p");
  note.textContent = "No geometry available for this level; showing values as a table.";
  const table = document.createElement("table");

  let currentStat = stat;

  function paint(values: Record<string, number | null>, stat: Stat): void {
    currentStat = stat;
    table.textContent = "";
    const head = table.insertRow();
    head.insertCell().textContent = "area";
    head.insertCell().textContent = STAT_LABELS[stat];
    for (const s of summaries) {
      const row = table.insertRow();
      row.insertCell().textContent = s.area_id;
      const v = values[s.area_id];
      row.insertCell().textContent = v === null || v === undefined ? "" : v.toPrecision(4);
    }
  }

  const fromSummaries = (stat: Stat) => {
    const out: Record<string, number | null> = {};
    for (const s of summaries) out[s.area_id] = statValue(s, stat);
    return out;
  };

  paint(fromSummaries(stat), stat);
  root.appendChild(note);
  root.appendChild(table);
  container.appendChild(root);
  return {
    kind: "table",
    element: root,
    svg: null,
    get stat() {
      return currentStat;
    },
    setStat(next: Stat) {
      paint(fromSummaries(next), next);
    },
    recolor(values, stat) {
      paint(values, stat);
    },
    legendLabel() {
      return STAT_LABELS[currentStat];
    },
    hovered() {
      return null;
    },
  };
}

export interface MapPanel {
  element: HTMLElement;
  view: ChoroplethView;
  slider: HTMLInputElement;
  statButtons: Map<Stat, HTMLButtonElement>;
  exceedanceRequests(): number;
}

/** Choropleth plus stat toggle and the live exceedance-threshold slider.
 *
 * Each slider change issues exactly one exceedance request and recolors the
 * current view in place.
 */
export function renderMapPanel(
  container: HTMLElement,
  api: ApiClient,
  fitId: string,
  geometry: FeatureCollection,
  summaries: AreaSummary[],
): MapPanel {
  container.textContent = "";
  const panel = document.createElement("div");
  panel.className = "map-panel";

  const toolbar = document.createElement("div");
  toolbar.className = "map-toolbar";
  const statButtons = new Map<Stat, HTMLButtonElement>();
  const mapHost = document.createElement("div");
  const view = renderChoropleth(mapHost, geometry, summaries, "point");

  let requests = 0;

  for (const stat of ["point", "ci_width", "cv", "exceedance"] as Stat[]) {
    const btn = document.createElement("button");
    btn.textContent = STAT_LABELS[stat];
    btn.dataset.stat = stat;
    btn.addEventListener("click", () => {
      if (stat === "exceedance") {
        void refreshExceedance();
      } else {
        view.setStat(stat);
      }
    });
    toolbar.appendChild(btn);
    statButtons.set(stat, btn);
  }

  const sliderWrap = document.createElement("label");
  sliderWrap.textContent = "threshold";
  const slider = document.createElement("input");
  slider.type = "range";
  slider.min = "0.01";
  slider.max = "0.99";
  slider.step = "0.01";
  slider.value = "0.30";
  sliderWrap.appendChild(slider);
  toolbar.appendChild(sliderWrap);

  async function refreshExceedance(): Promise<void> {
    const p0 = Number(slider.value);
    requests += 1;
    const resp = await api.exceedance(fitId, p0);
    view.recolor(resp.exceedance, "exceedance");
  }

  slider.addEventListener("change", () => {
    void refreshExceedance();
  });

  panel.appendChild(toolbar);
  panel.appendChild(mapHost);
  container.appendChild(panel);
  return {
    element: panel,
    view,
    slider,
    statButtons,
    exceedanceRequests: () => requests,
  };
}
