/** Model-selection panel: verdicts, verbatim gate messages, override
 * acknowledgments, and the advanced options (nested intercepts for level >= 2,
 * covariate upload). */

import type { FitRefusal, FitRequestBody, GateReport } from "./types.js";
import { WorkflowError, WorkflowState } from "./state.js";

const METHOD_LABELS: Record<string, string> = {
  direct: "Direct (weighted) estimates",
  area_level: "Area-level spatial model",
  unit_level: "Unit-level spatial model",
};

export interface ModelPanel {
  element: HTMLElement;
  methodButtons: Map<string, HTMLButtonElement>;
  overrideBoxes: Map<string, HTMLInputElement>;
  nestedToggle: HTMLInputElement | null;
  covariateInput: HTMLInputElement | null;
  selectedMethod(): string;
  showRefusal(refusal: FitRefusal): void;
  refusalText(): string;
  messageTexts(): string[];
}

export function renderModelPanel(
  container: HTMLElement,
  state: WorkflowState,
  gate: GateReport,
  onFit: (body: FitRequestBody) => void,
  seed?: number,
): ModelPanel {
  container.textContent = "";
  state.gateDisplayed(gate);

  const panel = document.createElement("div");
  panel.className = "model-panel";
  const level = gate.level;

  const messages = document.createElement("div");
  messages.className = "gate-messages";
  for (const text of gate.messages) {
    const p = document.createElement("p");
    p.className = "gate-message";
    p.textContent = text; // verbatim: the UI never rewrites gate wording
    messages.appendChild(p);
  }
  panel.appendChild(messages);

  const refusalBox = document.createElement("div");
  refusalBox.className = "refusal";

  const methodButtons = new Map<string, HTMLButtonElement>();
  const overrideBoxes = new Map<string, HTMLInputElement>();
  let selected = gate.recommendation;

  const list = document.createElement("div");
  list.className = "methods";
  for (const method of ["direct", "area_level", "unit_level"]) {
    const row = document.createElement("div");
    row.className = "method-row";
    const verdict = gate.verdicts[method];

    const choose = document.createElement("button");
    choose.textContent = METHOD_LABELS[method];
    choose.dataset.method = method;
    choose.dataset.verdict = verdict;
    if (method === gate.recommendation) {
      choose.classList.add("recommended");
    }
    if (verdict === "error_blocked") {
      choose.disabled = true;
    } else {
      choose.addEventListener("click", () => {
        selected = method;
        for (const [m, b] of methodButtons) b.classList.toggle("selected", m === method);
      });
    }
    if (method === selected && verdict !== "error_blocked") {
      choose.classList.add("selected");
    }
    row.appendChild(choose);

    if (verdict === "warn_overridable") {
      const label = document.createElement("label");
      const box = document.createElement("input");
      box.type = "checkbox";
      box.addEventListener("change", () => {
        if (box.checked) state.acknowledgeWarning(method, level);
        else state.withdrawAcknowledgment(method, level);
      });
      label.appendChild(box);
      label.appendChild(document.createTextNode(" proceed despite the warning"));
      row.appendChild(label);
      overrideBoxes.set(method, box);
    }
    list.appendChild(row);
    methodButtons.set(method, choose);
  }
  panel.appendChild(list);

  // advanced options
  const advanced = document.createElement("details");
  advanced.className = "advanced";
  const summaryEl = document.createElement("summary");
  summaryEl.textContent = "Advanced options";
  advanced.appendChild(summaryEl);

  let nestedToggle: HTMLInputElement | null = null;
  if (level >= 2) {
    const label = document.createElement("label");
    nestedToggle = document.createElement("input");
    nestedToggle.type = "checkbox";
    nestedToggle.dataset.option = "nested";
    label.appendChild(nestedToggle);
    label.appendChild(
      document.createTextNode(" nested model (admin-1 fixed effects, unit-level)"),
    );
    advanced.appendChild(label);
  }
  const covLabel = document.createElement("label");
  covLabel.appendChild(document.createTextNode("area covariates (CSV): "));
  const covariateInput = document.createElement("input");
  covariateInput.type = "file";
  covariateInput.accept = ".csv";
  covLabel.appendChild(covariateInput);
  advanced.appendChild(covLabel);
  panel.appendChild(advanced);

  const fitButton = document.createElement("button");
  fitButton.className = "fit";
  fitButton.textContent = "Fit selected model";
  fitButton.addEventListener("click", () => {
    refusalBox.textContent = "";
    const options: Record<string, unknown> = {};
    if (nestedToggle?.checked && selected === "unit_level") options.nested = true;
    try {
      onFit(state.fitRequest(selected, level, options, seed));
    } catch (err) {
      if (err instanceof WorkflowError) {
        refusalBox.textContent = err.message;
        return;
      }
      throw err;
    }
  });
  panel.appendChild(fitButton);
  panel.appendChild(refusalBox);

  container.appendChild(panel);
  return {
    element: panel,
    methodButtons,
    overrideBoxes,
    nestedToggle,
    covariateInput,
    selectedMethod: () => selected,
    showRefusal(refusal: FitRefusal) {
      refusalBox.textContent = "";
      for (const text of refusal.messages) {
        const p = document.createElement("p");
        p.className = "refusal-message";
        p.textContent = text; // rendered verbatim from the server payload
        refusalBox.appendChild(p);
      }
    },
    refusalText() {
      return refusalBox.textContent ?? "";
    },
    messageTexts() {
      return [...messages.querySelectorAll("p")].map((p) => p.textContent ?? "");
    },
  };
}
