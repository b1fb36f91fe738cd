import { readFileSync } from "node:fs";
import Papa from "papaparse";

export const KIND_ORDER = [
  "subspace",
  "multistep",
  "transient",
  "fixed_length",
  "state_space",
] as const;

export type Kind = (typeof KIND_ORDER)[number];

export interface SummaryRow {
  kind: string;
  trainMode: string;
  d: number;
  controller: string;
  runs: number;
  failures: number;
  divergedCount: number;
  meanRmseOpenTest: number;
  meanRmseClosedTest: number;
  meanCost: number;
  costRatioVsLqg: number;
  meanAbsU: number;
}

const REQUIRED_COLUMNS = [
  "kind",
  "train_mode",
  "d",
  "controller",
  "runs",
  "failures",
  "diverged_count",
  "mean_rmse_open_test",
  "mean_rmse_closed_test",
  "mean_cost",
  "cost_ratio_vs_lqg",
  "mean_abs_u",
];

export class SchemaError extends Error {}

/** Summary rows keyed by (kind, train_mode, d, controller); no duplicates. */
export class SummaryTable {
  readonly rows: SummaryRow[];

  constructor(rows: SummaryRow[]) {
    const seen = new Set<string>();
    for (const row of rows) {
      const key = `${row.kind}|${row.trainMode}|${row.d}|${row.controller}`;
      if (seen.has(key)) {
        throw new SchemaError(`duplicate summary key: ${key}`);
      }
      seen.add(key);
    }
    this.rows = rows;
  }

  get dValues(): number[] {
    return [...new Set(this.rows.map((r) => r.d))].sort((a, b) => a - b);
  }

  get trainModes(): string[] {
    const present = new Set(this.rows.map((r) => r.trainMode));
    return ["open", "closed"].filter((m) => present.has(m));
  }

  kinds(): string[] {
    const present = new Set(this.rows.map((r) => r.kind));
    const ordered = KIND_ORDER.filter((k) => present.has(k));
    const extras = [...present].filter((k) => !(KIND_ORDER as readonly string[]).includes(k)).sort();
    return [...ordered, ...extras];
  }

  find(kind: string, trainMode: string, d: number, controller = "delta0"): SummaryRow | undefined {
    return this.rows.find(
      (r) => r.kind === kind && r.trainMode === trainMode && r.d === d && r.controller === controller,
    );
  }
}

function toNumber(value: string, column: string): number {
  if (value === "" || value === undefined) return NaN;
  const x = Number(value);
  if (Number.isNaN(x) && value !== "nan") {
    throw new SchemaError(`non-numeric value ${JSON.stringify(value)} in column ${column}`);
  }
  return x;
}

export function parseSummary(csvText: string): SummaryTable {
  const parsed = Papa.parse<Record<string, string>>(csvText.trim(), {
    header: true,
    skipEmptyLines: true,
  });
  const fields = parsed.meta.fields ?? [];
  const missing = REQUIRED_COLUMNS.filter((c) => !fields.includes(c));
  if (missing.length > 0) {
    throw new SchemaError(`summary.csv is missing columns: ${missing.join(", ")}`);
  }
  if (parsed.data.length === 0) {
    throw new SchemaError("summary.csv contains no data rows");
  }
  const rows = parsed.data.map((rec) => ({
    kind: rec.kind,
    trainMode: rec.train_mode,
    d: toNumber(rec.d, "d"),
    controller: rec.controller,
    runs: toNumber(rec.runs, "runs"),
    failures: toNumber(rec.failures, "failures"),
    divergedCount: toNumber(rec.diverged_count, "diverged_count"),
    meanRmseOpenTest: toNumber(rec.mean_rmse_open_test, "mean_rmse_open_test"),
    meanRmseClosedTest: toNumber(rec.mean_rmse_closed_test, "mean_rmse_closed_test"),
    meanCost: toNumber(rec.mean_cost, "mean_cost"),
    costRatioVsLqg: toNumber(rec.cost_ratio_vs_lqg, "cost_ratio_vs_lqg"),
    meanAbsU: toNumber(rec.mean_abs_u, "mean_abs_u"),
  }));
  return new SummaryTable(rows);
}

export function loadSummary(path: string): SummaryTable {
  return parseSummary(readFileSync(path, "utf-8"));
}

export interface RunSeries {
  t: number[];
  u: number[][];
  y: number[][];
  yr: number[][];
}

/** Per-run trajectory CSV: t, u_*, y_*, yr_*, cost. */
export function parseRun(csvText: string): RunSeries {
  const parsed = Papa.parse<Record<string, string>>(csvText.trim(), {
    header: true,
    skipEmptyLines: true,
  });
  const fields = parsed.meta.fields ?? [];
  const uCols = fields.filter((f) => /^u_\d+$/.test(f));
  const yCols = fields.filter((f) => /^y_\d+$/.test(f));
  const yrCols = fields.filter((f) => /^yr_\d+$/.test(f));
  if (!fields.includes("t") || uCols.length === 0 || yCols.length === 0 || yrCols.length === 0) {
    const missing = [
      ...(fields.includes("t") ? [] : ["t"]),
      ...(uCols.length ? [] : ["u_*"]),
      ...(yCols.length ? [] : ["y_*"]),
      ...(yrCols.length ? [] : ["yr_*"]),
    ];
    throw new SchemaError(`run CSV is missing columns: ${missing.join(", ")}`);
  }
  const grab = (rec: Record<string, string>, cols: string[]) =>
    cols.map((c) => toNumber(rec[c], c));
  return {
    t: parsed.data.map((rec) => toNumber(rec.t, "t")),
    u: parsed.data.map((rec) => grab(rec, uCols)),
    y: parsed.data.map((rec) => grab(rec, yCols)),
    yr: parsed.data.map((rec) => grab(rec, yrCols)),
  };
}

export function loadRun(path: string): RunSeries {
  return parseRun(readFileSync(path, "utf-8"));
}
