import { parseArgs } from "node:util";
import { initBackend } from "./backend.js";
import { readDir } from "./cifar.js";
import { evaluate, printReport } from "./evaluate.js";
import { importModel } from "./sfrw.js";
import { DEFAULTS, TrainConfig, train } from "./train.js";

const USAGE = `usage:
  sfrelay-train --data DIR --out model.sfrw [--epochs N] [--batch N] [--lr F]
                [--alpha F] [--beta F] [--seed N] [--limit N] [--holdout N] [--quiet]
  sfrelay-train evaluate --model model.sfrw --data DIR [--limit N]

Trains the image codec on CIFAR-style record files (*.bin under --data) and
exports the weights plus quantization trailer to --out. The evaluate command
reloads an exported file and reports reconstruction error through the
quantized feature path.`;

function num(v: string | undefined, fallback: number, name: string): number {
  if (v === undefined) return fallback;
  const x = Number(v);
  if (!Number.isFinite(x)) throw new Error(`bad value for --${name}: ${v}`);
  return x;
}

async function runTrain(argv: string[]): Promise<number> {
  const { values } = parseArgs({
    args: argv,
    options: {
      data: { type: "string" },
      out: { type: "string" },
      epochs: { type: "string" },
      batch: { type: "string" },
      lr: { type: "string" },
      alpha: { type: "string" },
      beta: { type: "string" },
      seed: { type: "string" },
      limit: { type: "string" },
      holdout: { type: "string" },
      quiet: { type: "boolean", default: false },
      help: { type: "boolean", short: "h", default: false },
    },
  });
  if (values.help) {
    console.log(USAGE);
    return 0;
  }
  if (!values.data || !values.out) {
    console.error("--data and --out are required");
    console.error(USAGE);
    return 2;
  }
  const cfg: TrainConfig = {
    alpha: num(values.alpha, DEFAULTS.alpha, "alpha"),
    beta: num(values.beta, DEFAULTS.beta, "beta"),
    learningRate: num(values.lr, DEFAULTS.learningRate, "lr"),
    batchSize: num(values.batch, DEFAULTS.batchSize, "batch"),
    epochs: num(values.epochs, DEFAULTS.epochs, "epochs"),
    seed: num(values.seed, DEFAULTS.seed, "seed"),
    holdout: num(values.holdout, DEFAULTS.holdout, "holdout"),
    out: values.out,
    quiet: values.quiet,
  };
  const limit = values.limit === undefined ? undefined : num(values.limit, 0, "limit");
  const backend = await initBackend();
  if (!cfg.quiet) console.log(`backend: ${backend}`);
  const ds = readDir(values.data, limit);
  if (!cfg.quiet) console.log(`loaded ${ds.count} records from ${values.data}`);
  train(cfg, ds);
  return 0;
}

async function runEvaluate(argv: string[]): Promise<number> {
  const { values } = parseArgs({
    args: argv,
    options: {
      model: { type: "string" },
      data: { type: "string" },
      limit: { type: "string" },
      batch: { type: "string" },
      help: { type: "boolean", short: "h", default: false },
    },
  });
  if (values.help) {
    console.log(USAGE);
    return 0;
  }
  if (!values.model || !values.data) {
    console.error("--model and --data are required");
    return 2;
  }
  await initBackend();
  const limit = values.limit === undefined ? undefined : num(values.limit, 0, "limit");
  const ds = readDir(values.data, limit);
  const { info } = importModel(values.model);
  printReport(evaluate(values.model, ds, num(values.batch, 64, "batch")), info);
  return 0;
}

export async function main(argv: string[]): Promise<number> {
  try {
    if (argv[0] === "evaluate") return await runEvaluate(argv.slice(1));
    if (argv[0] === "--help" || argv[0] === "-h") {
      console.log(USAGE);
      return 0;
    }
    return await runTrain(argv);
  } catch (err) {
    console.error(err instanceof Error ? err.message : String(err));
    return 1;
  }
}
