import type { Figure, LineSeries } from "./figure.js";
import { renderFigureSvg } from "./figure.js";
import { KIND_ORDER } from "./summary.js";

/** Free-parameter counts of each predictor kind (published sizing formulas). */
export function paramCount(kind: string, m: number, h: number, nU: number, nY: number): number {
  const nZ = nU + nY;
  switch (kind) {
    case "subspace":
      return h * nY * (m * nZ + h * nU);
    case "multistep":
      return h * nY * m * nZ + (nY * nU * h * (h + 1)) / 2;
    case "transient":
      return h * nY * m * nZ + (nY * nU * h * (h + 1)) / 2 + (nY * nY * h * (h - 1)) / 2;
    case "fixed_length":
      return nY * nZ * m + nY * nU * h + nY * nY * (h - 1);
    case "state_space":
      return nY * (m * nZ + nU);
    default:
      throw new Error(`unknown predictor kind: ${kind}`);
  }
}

/**
 * Parameter-count curves over the output dimension, log scale, for fixed
 * memory and horizon with nU = max(1, nY / 2).
 */
export function buildParamsFigure(m = 20, h = 15, nYMax = 40): Figure {
  const nYs = Array.from({ length: nYMax }, (_, i) => i + 1);
  const series: LineSeries[] = KIND_ORDER.map((kind) => ({
    label: kind,
    x: nYs,
    y: nYs.map((nY) =>
      Math.log10(paramCount(kind, m, h, Math.max(1, Math.floor(nY / 2)), nY)),
    ),
  }));
  return {
    panels: [
      {
        type: "lines",
        title: `estimated parameters (m=${m}, h=${h}, n_u=n_y/2)`,
        series,
        yLabel: "log10 parameter count",
        xLabel: "output dimension n_y",
      },
    ],
    columns: 1,
    legend: { labels: [...KIND_ORDER] },
  };
}

export function renderParamsSvg(m?: number, h?: number, nYMax?: number): string {
  return renderFigureSvg(buildParamsFigure(m, h, nYMax));
}
