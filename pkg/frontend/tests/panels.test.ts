import { describe, expect, it } from "vitest";

import { renderModelPanel } from "../src/panels.js";
import { WorkflowState } from "../src/state.js";
import type { FitRefusal, FitRequestBody, GateReport } from "../src/types.js";

import { fixture, host } from "./helpers.js";

const gateMainL1 = fixture<GateReport>("gate_main_L1.json");
const gateMainL2 = fixture<GateReport>("gate_main_L2.json");
const gateSparse = fixture<GateReport>("gate_sparse_L1.json");
const refusalArea = fixture<FitRefusal>("refusal_area_sparse.json");

function panelFor(gate: GateReport, onFit: (body: FitRequestBody) => void = () => {}) {
  const state = new WorkflowState();
  state.bindDataset("ds1", [0, 1, 2]);
  return { panel: renderModelPanel(host(), state, gate, onFit), state };
}

describe("model selection panel", () => {
  it("pre-selects the recommended model", () => {
    const { panel } = panelFor(gateMainL1);
    expect(panel.selectedMethod()).toBe(gateMainL1.recommendation);
    const btn = panel.methodButtons.get(gateMainL1.recommendation)!;
    expect(btn.classList.contains("recommended")).toBe(true);
  });

  it("disables the blocked area-level control with the verbatim message", () => {
    const { panel } = panelFor(gateSparse);
    const areaBtn = panel.methodButtons.get("area_level")!;
    expect(gateSparse.verdicts.area_level).toBe("error_blocked");
    expect(areaBtn.disabled).toBe(true);
    const blockedMessages = gateSparse.messages.filter((m) =>
      m.startsWith("Area-level model:"),
    );
    for (const msg of blockedMessages) {
      expect(panel.messageTexts()).toContain(msg);
    }
  });

  it("renders every gate message string-equal to the service payload", () => {
    const { panel } = panelFor(gateSparse);
    expect(panel.messageTexts()).toEqual(gateSparse.messages);
  });

  it("override flow: acknowledgment checkbox makes the request carry override=true", () => {
    const sent: FitRequestBody[] = [];
    const { panel } = panelFor(gateSparse, (body) => sent.push(body));
    panel.methodButtons.get("direct")!.click();

    // without acknowledgment the request is not sent and the reason shows inline
    (panel.element.querySelector("button.fit") as HTMLButtonElement).click();
    expect(sent.length).toBe(0);
    expect(panel.refusalText()).toContain("acknowledged");

    const box = panel.overrideBoxes.get("direct")!;
    box.checked = true;
    box.dispatchEvent(new Event("change"));
    (panel.element.querySelector("button.fit") as HTMLButtonElement).click();
    expect(sent.length).toBe(1);
    expect(sent[0].method).toBe("direct");
    expect(sent[0].override).toBe(true);
  });

  it("an allowed method sends override=false", () => {
    const sent: FitRequestBody[] = [];
    const { panel } = panelFor(gateMainL1, (body) => sent.push(body));
    panel.methodButtons.get("area_level")!.click();
    (panel.element.querySelector("button.fit") as HTMLButtonElement).click();
    expect(sent.length).toBe(1);
    expect(sent[0]).toMatchObject({ method: "area_level", level: 1, override: false });
  });

  it("renders server refusals inline, string-equal to the payload", () => {
    const { panel } = panelFor(gateSparse);
    panel.showRefusal(refusalArea);
    const texts = [...panel.element.querySelectorAll(".refusal-message")].map(
      (p) => p.textContent,
    );
    expect(texts).toEqual(refusalArea.messages);
  });

  it("nested toggle hidden below level 2, visible at level 2", () => {
    const { panel: p1 } = panelFor(gateMainL1);
    expect(p1.nestedToggle).toBeNull();
    const { panel: p2 } = panelFor(gateMainL2);
    expect(p2.nestedToggle).not.toBeNull();
  });

  it("nested toggle flows into the unit-level fit options", () => {
    const sent: FitRequestBody[] = [];
    const { panel } = panelFor(gateMainL2, (body) => sent.push(body));
    panel.methodButtons.get("unit_level")!.click();
    panel.nestedToggle!.checked = true;
    (panel.element.querySelector("button.fit") as HTMLButtonElement).click();
    expect(sent[0].options).toEqual({ nested: true });
  });

  it("offers a covariate upload control in the advanced panel", () => {
    const { panel } = panelFor(gateMainL1);
    expect(panel.covariateInput).not.toBeNull();
    expect(panel.covariateInput!.accept).toBe(".csv");
  });
});
