#!/usr/bin/env node
import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { loadRun, loadSummary, SchemaError } from "./summary.js";
import { renderSweepSvg } from "./sweepPlot.js";
import { AssertionFailure, buildTrajFigure } from "./trajPlot.js";
import { renderParamsSvg } from "./paramsPlot.js";
import { writeFigure } from "./render.js";

function fail(message: string, code: number): never {
  console.error(`error: ${message}`);
  process.exit(code);
}

export async function main(argv: string[]): Promise<void> {
  await yargs(argv)
    .scriptName("plots")
    .command(
      "sweep <csv>",
      "render the six-panel sweep figure from summary.csv",
      (y) =>
        y
          .positional("csv", { type: "string", demandOption: true })
          .option("out", { type: "string", default: "figures" })
          .option("controller", { type: "string", default: "delta0" }),
      (args) => {
        try {
          const table = loadSummary(args.csv);
          const svg = renderSweepSvg(table, args.controller);
          const [svgPath, pngPath] = writeFigure(args.out, "sweep", svg);
          console.log(svgPath);
          console.log(pngPath);
        } catch (err) {
          if (err instanceof SchemaError) fail(err.message, 2);
          throw err;
        }
      },
    )
    .command(
      "traj <relaxed> <delta0>",
      "render paired trajectory overlays (relaxed left, strict right)",
      (y) =>
        y
          .positional("relaxed", { type: "string", demandOption: true })
          .positional("delta0", { type: "string", demandOption: true })
          .option("out", { type: "string", default: "figures" }),
      (args) => {
        try {
          const relaxed = loadRun(args.relaxed);
          const delta0 = loadRun(args.delta0);
          const result = buildTrajFigure(relaxed, delta0);
          if (result.referenceMismatch) {
            console.warn("warning: the two runs track different references");
          }
          const [svgPath, pngPath] = writeFigure(args.out, "trajectories", result.svg);
          console.log(
            `mean|u| relaxed=${result.meanAbsURelaxed.toPrecision(4)} ` +
              `delta0=${result.meanAbsUDelta0.toPrecision(4)}`,
          );
          console.log(svgPath);
          console.log(pngPath);
        } catch (err) {
          if (err instanceof SchemaError) fail(err.message, 2);
          if (err instanceof AssertionFailure) fail(err.message, 1);
          throw err;
        }
      },
    )
    .command(
      "params",
      "render the parameter-count comparison curves",
      (y) =>
        y
          .option("out", { type: "string", default: "figures" })
          .option("m", { type: "number", default: 20 })
          .option("h", { type: "number", default: 15 })
          .option("ny-max", { type: "number", default: 40 }),
      (args) => {
        const svg = renderParamsSvg(args.m, args.h, args["ny-max"]);
        const [svgPath, pngPath] = writeFigure(args.out, "param_counts", svg);
        console.log(svgPath);
        console.log(pngPath);
      },
    )
    .demandCommand(1)
    .strict()
    .help()
    .parseAsync();
}

const isMain = process.argv[1] && import.meta.url.endsWith(process.argv[1].split("/").pop() ?? "");
if (isMain) {
  main(hideBin(process.argv));
}
