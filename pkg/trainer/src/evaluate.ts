import fs from "fs";
import { quantizeFeatures } from "./calibrate.js";
import { Dataset } from "./cifar.js";
import { IMG, LATENT, Model, NUM_CLASSES, decode, encode, headForward } from "./model.js";
import { ExportInfo, importModel } from "./sfrw.js";

export interface Report {
  mse: number;
  latentP001: number;
  latentP999: number;
  outsideClipFraction: number;
  sigmaS: number;
  headAccuracy?: number;
}

/**
 * Calibration sanity report for an exported file: reconstruction MSE through
 * the quantized feature path, latent percentiles vs the stored clip range,
 * and (when the training-side head sidecar is present) the accuracy of the
 * discarded classification head.
 */
export function evaluate(modelPath: string, ds: Dataset, batch = 64): Report {
  const { model, info } = importModel(modelPath);
  const headPath = modelPath + ".head.json";
  if (fs.existsSync(headPath)) {
    const head = JSON.parse(fs.readFileSync(headPath, "utf8"));
    model.headW = Float32Array.from(head.headW);
    model.headB = Float32Array.from(head.headB);
  }

  const latSize = LATENT[0] * LATENT[1] * LATENT[2];
  const lat = new Float32Array(ds.count * latSize);
  let sse = 0, n = 0, correct = 0;
  for (let at = 0; at < ds.count; at += batch) {
    const b = Math.min(batch, ds.count - at);
    const x = ds.images.subarray(at * IMG * IMG * 3, (at + b) * IMG * IMG * 3);
    const feat = encode(model, x, b);
    lat.set(feat, at * latSize);
    const recon = decode(model, quantizeFeatures(feat, info.clipMin, info.clipMax), b);
    for (let i = 0; i < recon.length; i++) {
      const e = recon[i] - x[i];
      sse += e * e;
    }
    n += recon.length;
    if (model.headW.length) {
      const { probs } = headForward(model, feat, b);
      for (let i = 0; i < b; i++) {
        let best = 0;
        for (let k = 1; k < NUM_CLASSES; k++) {
          if (probs[i * NUM_CLASSES + k] > probs[i * NUM_CLASSES + best]) best = k;
        }
        if (best === ds.labels[at + i]) correct += 1;
      }
    }
  }

  const sorted = lat.slice();
  sorted.sort();
  const pick = (q: number) => sorted[Math.min(sorted.length - 1,
                                              Math.round(q * (sorted.length - 1)))];
  let outside = 0;
  for (let i = 0; i < lat.length; i++) {
    if (lat[i] < info.clipMin || lat[i] > info.clipMax) outside += 1;
  }

  const report: Report = {
    mse: sse / n,
    latentP001: pick(0.001),
    latentP999: pick(0.999),
    outsideClipFraction: outside / lat.length,
    sigmaS: info.sigmaS,
  };
  if (model.headW.length) report.headAccuracy = correct / ds.count;
  return report;
}

export function printReport(r: Report, info?: ExportInfo): void {
  console.log(`recon MSE (quantized path):   ${r.mse.toExponential(4)}`);
  console.log(`latent 0.1% / 99.9%:          ${r.latentP001.toFixed(4)} / ${r.latentP999.toFixed(4)}`);
  console.log(`latent outside clip range:    ${(100 * r.outsideClipFraction).toFixed(3)}%`);
  console.log(`stored sigma_s:               ${r.sigmaS.toFixed(5)}`);
  if (r.headAccuracy !== undefined) {
    console.log(`head accuracy (discarded):    ${(100 * r.headAccuracy).toFixed(1)}%`);
  }
  if (info) {
    console.log(`stored clip range:            [${info.clipMin.toFixed(4)}, ${info.clipMax.toFixed(4)}]`);
  }
}
