import { mkdirSync, writeFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { Resvg } from "@resvg/resvg-js";

export function svgToPng(svg: string): Buffer {
  const resvg = new Resvg(svg, {
    background: "white",
    fitTo: { mode: "zoom", value: 2 },
  });
  return resvg.render().asPng();
}

/** Write <name>.svg and <name>.png under outDir; returns the two paths. */
export function writeFigure(outDir: string, name: string, svg: string): [string, string] {
  mkdirSync(outDir, { recursive: true });
  const svgPath = join(outDir, `${name}.svg`);
  const pngPath = join(outDir, `${name}.png`);
  writeFileSync(svgPath, svg);
  writeFileSync(pngPath, svgToPng(svg));
  return [svgPath, pngPath];
}

export function ensureDir(path: string): void {
  mkdirSync(dirname(path), { recursive: true });
}
