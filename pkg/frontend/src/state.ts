/** Workflow state machine.
 *
 * Encodes the two UI invariants the service cannot enforce on its own:
 * a fit can only be requested for a level whose gate verdict has been
 * displayed, and an overridable warning needs an explicit acknowledgment
 * before the request carries override=true.
 */

import type { FitRequestBody, GateReport } from "./types.js";

export class WorkflowError extends Error {}

export type FitStatus = "queued" | "running" | "done" | "failed";

export class WorkflowState {
  datasetId: string | null = null;
  levels: number[] = [];
  selectedLevel: number | null = null;
  private gates = new Map<number, GateReport>();
  private acknowledged = new Set<string>();
  readonly fits = new Map<string, { method: string; level: number; status: FitStatus }>();
  activeStat: "point" | "ci_width" | "cv" | "exceedance" = "point";
  threshold = 0.5;

  bindDataset(datasetId: string, levels: number[]): void {
    this.datasetId = datasetId;
    this.levels = [...levels];
    this.gates.clear();
    this.acknowledged.clear();
    this.fits.clear();
  }

  /** Record that a gate report for a level has been shown to the analyst. */
  gateDisplayed(report: GateReport): void {
    this.gates.set(report.level, report);
  }

  gateFor(level: number): GateReport | undefined {
    return this.gates.get(level);
  }

  /** Explicit acknowledgment of an overridable warning for one method+level. */
  acknowledgeWarning(method: string, level: number): void {
    this.acknowledged.add(`${method}@${level}`);
  }

  withdrawAcknowledgment(method: string, level: number): void {
    this.acknowledged.delete(`${method}@${level}`);
  }

  isAcknowledged(method: string, level: number): boolean {
    return this.acknowledged.has(`${method}@${level}`);
  }

  /** Build the POST /fits body, enforcing the workflow invariants. */
  fitRequest(
    method: string,
    level: number,
    options: Record<string, unknown> = {},
    seed?: number,
  ): FitRequestBody {
    if (!this.datasetId) {
      throw new WorkflowError("no dataset bound");
    }
    const gate = this.gates.get(level);
    if (!gate) {
      throw new WorkflowError(
        `gate verdict for level ${level} has not been displayed yet`,
      );
    }
    const verdict = gate.verdicts[method];
    if (verdict === "error_blocked") {
      throw new WorkflowError(gate.messages.join("\n"));
    }
    let override = false;
    if (verdict === "warn_overridable") {
      if (!this.isAcknowledged(method, level)) {
        throw new WorkflowError(
          "this warning must be acknowledged before fitting",
        );
      }
      override = true;
    }
    const body: FitRequestBody = {
      dataset_id: this.datasetId,
      method,
      level,
      options,
      override,
    };
    if (seed !== undefined) body.seed = seed;
    return body;
  }

  trackJob(jobId: string, method: string, level: number): void {
    this.fits.set(jobId, { method, level, status: "queued" });
  }

  updateJob(jobId: string, status: FitStatus): void {
    const fit = this.fits.get(jobId);
    if (fit) fit.status = status;
  }

  completedFits(): Array<{ jobId: string; method: string; level: number }> {
    return [...this.fits.entries()]
      .filter(([, f]) => f.status === "done")
      .map(([jobId, f]) => ({ jobId, method: f.method, level: f.level }));
  }
}
