import type { BarPanel, Figure } from "./figure.js";
import { renderFigureSvg } from "./figure.js";
import type { SummaryTable, SummaryRow } from "./summary.js";

type Metric = (row: SummaryRow) => number;

const METRICS: { title: string; yLabel: string; value: Metric; refLine?: number; yMax?: number }[] = [
  { title: "open-loop test RMSE", yLabel: "RMSE", value: (r) => r.meanRmseOpenTest, yMax: 2.0 },
  { title: "closed-loop test RMSE", yLabel: "RMSE", value: (r) => r.meanRmseClosedTest, yMax: 2.0 },
  {
    title: "cost / oracle LQG",
    yLabel: "normalized cost",
    value: (r) => r.costRatioVsLqg,
    refLine: 1.0,
    yMax: 3.0,
  },
];

/**
 * Six-panel sweep figure: rows are training modes, columns are the two test
 * RMSEs plus the LQG-normalized cost with the oracle floor at 1.0. Bars are
 * grouped by training size and ordered subspace..state_space inside each
 * group.
 */
export function buildSweepFigure(table: SummaryTable, controller = "delta0"): Figure {
  const kinds = table.kinds();
  const modes = table.trainModes.length > 0 ? table.trainModes : ["open"];
  const panels: BarPanel[] = [];
  for (const mode of modes) {
    for (const metric of METRICS) {
      panels.push({
        type: "bars",
        title: `${mode}-loop training: ${metric.title}`,
        series: kinds,
        yLabel: metric.yLabel,
        refLine: metric.refLine,
        yMax: metric.yMax,
        groups: table.dValues.map((d) => ({
          label: `d=${d}`,
          values: kinds.map((kind) => {
            const row = table.find(kind, mode, d, controller);
            return row && Number.isFinite(metric.value(row)) ? metric.value(row) : null;
          }),
        })),
      });
    }
  }
  return {
    panels,
    columns: METRICS.length,
    legend: { labels: kinds },
    caption: "bars clipped at the axis limit are marked ^; dashed line = oracle LQG floor",
  };
}

export function renderSweepSvg(table: SummaryTable, controller = "delta0"): string {
  return renderFigureSvg(buildSweepFigure(table, controller));
}
