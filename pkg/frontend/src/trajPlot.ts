import type { Figure, LinePanel } from "./figure.js";
import { renderFigureSvg } from "./figure.js";
import type { RunSeries } from "./summary.js";

export class AssertionFailure extends Error {}

export function meanAbsU(run: RunSeries): number {
  let total = 0;
  let count = 0;
  for (const row of run.u) {
    for (const v of row) {
      total += Math.abs(v);
      count += 1;
    }
  }
  return total / Math.max(count, 1);
}

export function referencesMatch(a: RunSeries, b: RunSeries, tol = 1e-9): boolean {
  if (a.yr.length !== b.yr.length) return false;
  for (let t = 0; t < a.yr.length; t++) {
    for (let j = 0; j < a.yr[t].length; j++) {
      if (Math.abs(a.yr[t][j] - b.yr[t][j]) > tol) return false;
    }
  }
  return true;
}

function outputPanel(title: string, run: RunSeries): LinePanel {
  return {
    type: "lines",
    title,
    yLabel: "y1",
    xLabel: "t",
    series: [
      { label: "y1", x: run.t, y: run.y.map((r) => r[0]), color: "#4c72b0" },
      { label: "reference", x: run.t, y: run.yr.map((r) => r[0]), color: "#222222", dashed: true },
    ],
  };
}

function inputPanel(title: string, run: RunSeries): LinePanel {
  return {
    type: "lines",
    title,
    yLabel: "u",
    xLabel: "t",
    series: [{ label: "u", x: run.t, y: run.u.map((r) => r[0]), color: "#dd8452" }],
  };
}

export interface TrajPlotResult {
  svg: string;
  meanAbsURelaxed: number;
  meanAbsUDelta0: number;
  referenceMismatch: boolean;
}

/**
 * 2x2 trajectory overlay: outputs on top, inputs below; the relaxed run on
 * the left, the strict run on the right. The embedded control-effort check
 * (relaxed mean |u| strictly below the strict controller's) throws rather
 * than rendering a figure that contradicts its own caption.
 */
export function buildTrajFigure(relaxed: RunSeries, delta0: RunSeries): TrajPlotResult {
  const uRelaxed = meanAbsU(relaxed);
  const uDelta0 = meanAbsU(delta0);
  // a figure claiming the relaxed controller saves effort must not render
  // when the data says otherwise; exact equality (the same file twice) is a
  // degenerate but truthful rendering
  if (uRelaxed > uDelta0) {
    throw new AssertionFailure(
      `relaxed controller should use less effort: mean|u| ${uRelaxed.toPrecision(4)} ` +
        `(relaxed) vs ${uDelta0.toPrecision(4)} (delta0)`,
    );
  }
  const mismatch = !referencesMatch(relaxed, delta0);
  const figure: Figure = {
    panels: [
      outputPanel("relax-and-regularize: output", relaxed),
      outputPanel("strict (delta0): output", delta0),
      inputPanel(`relax-and-regularize: input (mean|u| ${uRelaxed.toPrecision(3)})`, relaxed),
      inputPanel(`strict (delta0): input (mean|u| ${uDelta0.toPrecision(3)})`, delta0),
    ],
    columns: 2,
    caption: "dashed line = reference",
  };
  return {
    svg: renderFigureSvg(figure),
    meanAbsURelaxed: uRelaxed,
    meanAbsUDelta0: uDelta0,
    referenceMismatch: mismatch,
  };
}
