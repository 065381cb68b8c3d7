import fs from "fs";
import { computeClipRange, computeSigmaS } from "./calibrate.js";
import { Dataset } from "./cifar.js";
import { IMG, Model, backward, forward, initModel } from "./model.js";
import { ExportInfo, exportModel } from "./sfrw.js";
import { Rng } from "./rng.js";

export interface TrainConfig {
  alpha: number;
  beta: number;
  learningRate: number;
  batchSize: number;
  epochs: number;
  seed: number;
  /** records held out of training for sigma_s calibration */
  holdout: number;
  out?: string;
  quiet?: boolean;
}

export const DEFAULTS: Omit<TrainConfig, "out"> = {
  alpha: 1.5,
  beta: 0.56,
  learningRate: 0.001,
  batchSize: 64,
  epochs: 200,
  seed: 7,
  holdout: 64,
};

export function checkConfig(cfg: TrainConfig): void {
  if (!(cfg.alpha > 0)) throw new Error("alpha must be > 0");
  // beta = 0 is the documented pure-MSE ablation
  if (!(cfg.beta >= 0)) throw new Error("beta must be >= 0");
  if (!(cfg.learningRate > 0)) throw new Error("learning rate must be > 0");
  if (cfg.batchSize < 1 || cfg.epochs < 1) throw new Error("bad batch/epoch count");
}

class Adam {
  private m: Float64Array;
  private v: Float64Array;
  private t = 0;

  constructor(size: number, private lr: number) {
    this.m = new Float64Array(size);
    this.v = new Float64Array(size);
  }

  /** One fused step over the concatenation of all parameter tensors. */
  step(params: Float32Array[], grads: Float32Array[]): void {
    this.t += 1;
    const b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const c1 = 1 - Math.pow(b1, this.t);
    const c2 = 1 - Math.pow(b2, this.t);
    let at = 0;
    for (let pi = 0; pi < params.length; pi++) {
      const p = params[pi], g = grads[pi];
      for (let i = 0; i < p.length; i++, at++) {
        const m = (this.m[at] = b1 * this.m[at] + (1 - b1) * g[i]);
        const v = (this.v[at] = b2 * this.v[at] + (1 - b2) * g[i] * g[i]);
        p[i] -= (this.lr * (m / c1)) / (Math.sqrt(v / c2) + eps);
      }
    }
  }
}

export interface TrainResult {
  model: Model;
  info: ExportInfo;
  /** mean of alpha*MSE + beta*CE per epoch */
  epochLosses: number[];
  finalMse: number;
  finalCe: number;
}

function paramList(model: Model): Float32Array[] {
  const out: Float32Array[] = [];
  for (const p of model.params) out.push(p.w, p.b);
  out.push(model.headW, model.headB);
  return out;
}

/**
 * Train the codec on the given dataset and calibrate the export trailer.
 * The last cfg.holdout records never enter a gradient step; they provide
 * the sigma_s measurement.
 */
export function train(cfg: TrainConfig, ds: Dataset): TrainResult {
  checkConfig(cfg);
  if (ds.count <= cfg.holdout) {
    throw new Error(`need more than ${cfg.holdout} records, got ${ds.count}`);
  }
  const nTrain = ds.count - cfg.holdout;
  const holdout: Dataset = {
    images: ds.images.subarray(nTrain * IMG * IMG * 3),
    labels: ds.labels.subarray(nTrain) as Int32Array,
    count: cfg.holdout,
  };

  const model = initModel(cfg.seed);
  const params = paramList(model);
  const opt = new Adam(params.reduce((s, p) => s + p.length, 0), cfg.learningRate);
  const rng = new Rng(cfg.seed ^ 0x5f3759df);
  const order = new Int32Array(nTrain);
  const imgSize = IMG * IMG * 3;
  const batchX = new Float32Array(cfg.batchSize * imgSize);
  const batchY = new Int32Array(cfg.batchSize);

  const epochLosses: number[] = [];
  let finalMse = 0, finalCe = 0;
  for (let epoch = 0; epoch < cfg.epochs; epoch++) {
    for (let i = 0; i < nTrain; i++) order[i] = i;
    rng.shuffle(order);
    let lossSum = 0, mseSum = 0, ceSum = 0, batches = 0;
    for (let at = 0; at < nTrain; at += cfg.batchSize) {
      const b = Math.min(cfg.batchSize, nTrain - at);
      for (let i = 0; i < b; i++) {
        const src = order[at + i];
        batchX.set(ds.images.subarray(src * imgSize, (src + 1) * imgSize), i * imgSize);
        batchY[i] = ds.labels[src];
      }
      const x = b === cfg.batchSize ? batchX : batchX.subarray(0, b * imgSize);
      const st = forward(model, x, b);
      const { grads, mse, ce } = backward(model, st, x, b,
                                          batchY.subarray(0, b) as Int32Array,
                                          cfg.alpha, cfg.beta);
      const loss = cfg.alpha * mse + cfg.beta * ce;
      if (!Number.isFinite(loss)) {
        throw new Error(`training diverged at epoch ${epoch + 1} batch ${batches + 1}: `
          + `mse=${mse} ce=${ce}`);
      }
      const gradList: Float32Array[] = [];
      for (const g of grads.layers) gradList.push(g.dw, g.db);
      gradList.push(grads.headW, grads.headB);
      opt.step(params, gradList);
      lossSum += loss;
      mseSum += mse;
      ceSum += ce;
      batches += 1;
    }
    epochLosses.push(lossSum / batches);
    finalMse = mseSum / batches;
    finalCe = ceSum / batches;
    if (!cfg.quiet) {
      console.log(`epoch ${epoch + 1}/${cfg.epochs}  loss ${(lossSum / batches).toFixed(5)}  `
        + `mse ${finalMse.toFixed(5)}  ce ${finalCe.toFixed(4)}`);
    }
  }

  const trainView: Dataset = {
    images: ds.images.subarray(0, nTrain * imgSize),
    labels: ds.labels.subarray(0, nTrain) as Int32Array,
    count: nTrain,
  };
  const { clipMin, clipMax } = computeClipRange(model, trainView, cfg.batchSize);
  const sigmaS = computeSigmaS(model, holdout, clipMin, clipMax, cfg.batchSize);
  const info: ExportInfo = { clipMin, clipMax, sigmaS };
  if (!cfg.quiet) {
    console.log(`calibrated clip [${clipMin.toFixed(4)}, ${clipMax.toFixed(4)}], `
      + `sigma_s ${sigmaS.toFixed(5)}`);
  }
  if (cfg.out) {
    exportModel(model, info, cfg.out);
    fs.writeFileSync(cfg.out + ".head.json", JSON.stringify({
      headW: Array.from(model.headW),
      headB: Array.from(model.headB),
    }));
    if (!cfg.quiet) console.log(`wrote ${cfg.out}`);
  }
  return { model, info, epochLosses, finalMse, finalCe };
}
