import { execFileSync } from "child_process";
import fs from "fs";
import path from "path";
import { fileURLToPath } from "url";
import { beforeAll, describe, expect, it } from "vitest";
import { initBackend } from "../src/backend.js";
import { computeSigmaS, quantizeFeatures } from "../src/calibrate.js";
import { Dataset, readDir } from "../src/cifar.js";
import { evaluate } from "../src/evaluate.js";
import { IMG, initModel } from "../src/model.js";
import { importModel } from "../src/sfrw.js";
import { DEFAULTS, TrainConfig, checkConfig, train } from "../src/train.js";
import { tmpdir, writeDataset } from "./helpers.js";

beforeAll(() => initBackend());

const BIN = path.join(path.dirname(fileURLToPath(import.meta.url)), "..", "bin", "sfrelay-train.js");

function smallCfg(over: Partial<TrainConfig>): TrainConfig {
  return { ...DEFAULTS, quiet: true, ...over };
}

function lastN(ds: Dataset, n: number): Dataset {
  const imgSize = IMG * IMG * 3;
  return {
    images: ds.images.subarray((ds.count - n) * imgSize),
    labels: ds.labels.subarray(ds.count - n) as Int32Array,
    count: n,
  };
}

describe("checkConfig", () => {
  it("rejects out-of-range settings", () => {
    expect(() => checkConfig(smallCfg({ alpha: 0 }))).toThrow(/alpha/);
    expect(() => checkConfig(smallCfg({ beta: -0.1 }))).toThrow(/beta/);
    expect(() => checkConfig(smallCfg({ learningRate: 0 }))).toThrow(/learning rate/);
    expect(() => checkConfig(smallCfg({ batchSize: 0 }))).toThrow(/batch/);
    expect(() => checkConfig(smallCfg({ epochs: 0 }))).toThrow(/batch|epoch/);
    checkConfig(smallCfg({ beta: 0 })); // pure-MSE ablation is legal
  });
});

describe("quantizeFeatures", () => {
  it("is a 256-level grid snap that clamps outside the clip range", () => {
    const q = quantizeFeatures(Float32Array.from([-5, -1, 0, 0.5, 1, 7]), -1, 1);
    expect(q[0]).toBe(-1);
    expect(q[1]).toBe(-1);
    expect(q[5]).toBe(1);
    for (const [i, v] of [[2, 0], [3, 0.5]] as const) {
      // half a quantizer step, plus an ulp for the f32 store
      expect(Math.abs(q[i] - v)).toBeLessThanOrEqual(1 / 255 + 1e-8);
      const level = ((q[i] + 1) / 2) * 255;
      expect(Math.abs(level - Math.round(level))).toBeLessThan(1e-4);
    }
  });
});

describe("train", () => {
  it("needs more records than the holdout", () => {
    const dir = tmpdir();
    writeDataset(dir, 32, 2);
    const ds = readDir(dir);
    expect(() => train(smallCfg({ epochs: 1 }), ds)).toThrow(/more than/);
    fs.rmSync(dir, { recursive: true });
  });

  it("aborts with diagnostics when the loss diverges", () => {
    const dir = tmpdir();
    writeDataset(dir, 128, 3);
    const ds = readDir(dir);
    expect(() => train(smallCfg({ epochs: 3, learningRate: 1e6 }), ds))
      .toThrow(/diverged at epoch/);
    fs.rmSync(dir, { recursive: true });
  });

  it("is reproducible: same seed, same losses, same exported bytes", () => {
    const dir = tmpdir();
    writeDataset(dir, 128, 4);
    const ds = readDir(dir);
    const outA = path.join(dir, "a.sfrw");
    const outB = path.join(dir, "b.sfrw");
    const a = train(smallCfg({ epochs: 2, out: outA }), ds);
    const b = train(smallCfg({ epochs: 2, out: outB }), ds);
    expect(a.epochLosses).toEqual(b.epochLosses);
    expect(Buffer.compare(fs.readFileSync(outA), fs.readFileSync(outB))).toBe(0);
    expect(evaluate(outA, ds).mse).toBe(evaluate(outB, ds).mse);
    fs.rmSync(dir, { recursive: true });
  });

  it("pure-MSE ablation (beta 0) still exports a loadable file", () => {
    const dir = tmpdir();
    writeDataset(dir, 128, 5);
    const ds = readDir(dir);
    const out = path.join(dir, "ablate.sfrw");
    const res = train(smallCfg({ epochs: 3, beta: 0, out }), ds);
    for (const l of res.epochLosses) expect(Number.isFinite(l)).toBe(true);
    // with beta 0 the reported loss is alpha * mse alone
    expect(res.epochLosses[2]).toBeCloseTo(1.5 * res.finalMse, 4);
    const back = importModel(out);
    expect(back.info.clipMin).toBeLessThan(back.info.clipMax);
    expect(back.info.sigmaS).toBeGreaterThan(0);
    fs.rmSync(dir, { recursive: true });
  });

  it("smoke run halves the training loss inside 20 epochs", () => {
    const dir = tmpdir();
    writeDataset(dir, 500, 6);
    const ds = readDir(dir);
    const out = path.join(dir, "smoke.sfrw");
    const res = train(smallCfg({ epochs: 20, out }), ds);
    expect(res.epochLosses.length).toBe(20);
    expect(res.epochLosses[19]).toBeLessThanOrEqual(0.5 * res.epochLosses[0]);

    const { model, info } = importModel(out);
    expect(info.clipMin).toBeLessThan(info.clipMax);
    expect(info.sigmaS).toBeGreaterThan(0);
    expect(fs.existsSync(out + ".head.json")).toBe(true);

    // the stored sigma must reproduce from the imported weights and the
    // same holdout slice (the last `holdout` records)
    const redo = computeSigmaS(model, lastN(ds, DEFAULTS.holdout), info.clipMin, info.clipMax);
    expect(Math.fround(redo)).toBe(info.sigmaS);

    // clip range is the 0.1%/99.9% percentile pair, so at most 0.2% of
    // latent samples may fall outside it
    const report = evaluate(out, ds);
    expect(report.outsideClipFraction).toBeLessThanOrEqual(0.002);
    expect(report.mse).toBeLessThan(0.05);
    expect(report.headAccuracy).toBeGreaterThan(0.5);
    fs.rmSync(dir, { recursive: true });
  });

  it("fails fast when the dataset directory is missing", () => {
    expect(() => execFileSync(process.execPath, [
      BIN, "--data", "/no/such/dir", "--out", "/tmp/never.sfrw", "--quiet",
    ], { stdio: "pipe", timeout: 120_000 })).toThrow();
  });

  it("full-length run with the default settings completes via the CLI", () => {
    const dir = tmpdir();
    writeDataset(dir, 128, 7);
    const out = path.join(dir, "full.sfrw");
    execFileSync(process.execPath, [
      BIN, "--data", dir, "--out", out,
      "--epochs", "200", "--batch", "64", "--lr", "0.001",
      "--alpha", "1.5", "--beta", "0.56", "--seed", "7", "--quiet",
    ], { stdio: "pipe", timeout: 1_500_000 });
    const { info } = importModel(out);
    expect(info.clipMin).toBeLessThan(info.clipMax);
    expect(info.sigmaS).toBeGreaterThan(0);

    const report = execFileSync(process.execPath, [
      BIN, "evaluate", "--model", out, "--data", dir,
    ], { stdio: "pipe", timeout: 600_000 }).toString();
    expect(report).toMatch(/recon MSE/);
    expect(report).toMatch(/sigma_s/);
    fs.rmSync(dir, { recursive: true });
  });
});
