import fs from "fs";
import os from "os";
import path from "path";
import { LayerSpec, outSize } from "../src/ops.js";
import { Model, NUM_CLASSES } from "../src/model.js";
import { RECORD_BYTES } from "../src/cifar.js";
import { Rng } from "../src/rng.js";

export function tmpdir(): string {
  return fs.mkdtempSync(path.join(os.tmpdir(), "sfrt-"));
}

/**
 * Double-precision reference for a single layer, written as plain loops so it
 * shares nothing with the im2col/GEMM production path. Weights are read in
 * the same packed layout the model stores them in.
 */
export function refLayerForward(
  spec: LayerSpec, w: Float32Array, bias: Float32Array,
  x: Float64Array, b: number, h: number, width: number,
): { out: Float64Array; oh: number; ow: number } {
  const [oh, ow] = outSize(spec, h, width);
  const out = new Float64Array(b * oh * ow * spec.outCh);
  const { inCh, outCh, kh, kw, stride } = spec;
  if (spec.kind === "conv") {
    for (let bi = 0; bi < b; bi++) {
      for (let oy = 0; oy < oh; oy++) {
        for (let ox = 0; ox < ow; ox++) {
          for (let o = 0; o < outCh; o++) {
            let acc = bias[o];
            for (let ki = 0; ki < kh; ki++) {
              for (let kj = 0; kj < kw; kj++) {
                for (let c = 0; c < inCh; c++) {
                  const xv = x[((bi * h + oy * stride + ki) * width + ox * stride + kj) * inCh + c];
                  acc += xv * w[((ki * kw + kj) * inCh + c) * outCh + o];
                }
              }
            }
            out[((bi * oh + oy) * ow + ox) * outCh + o] = acc;
          }
        }
      }
    }
  } else {
    for (let o = 0; o < out.length; o += outCh) {
      for (let c = 0; c < outCh; c++) out[o + c] = bias[c];
    }
    for (let bi = 0; bi < b; bi++) {
      for (let iy = 0; iy < h; iy++) {
        for (let ix = 0; ix < width; ix++) {
          for (let ki = 0; ki < kh; ki++) {
            for (let kj = 0; kj < kw; kj++) {
              const oy = iy * stride + ki;
              const ox = ix * stride + kj;
              for (let o = 0; o < outCh; o++) {
                let acc = 0;
                for (let c = 0; c < inCh; c++) {
                  acc += x[((bi * h + iy) * width + ix) * inCh + c]
                    * w[c * kh * kw * outCh + (ki * kw + kj) * outCh + o];
                }
                out[((bi * oh + oy) * ow + ox) * outCh + o] += acc;
              }
            }
          }
        }
      }
    }
  }
  return { out, oh, ow };
}

/** Full-codec forward in float64; relu between layers, sigmoid on the last. */
export function refForward(model: Model, x: Float64Array, b: number, img: number) {
  let cur = x;
  let h = img, w = img;
  let latent = x;
  let lh = img;
  for (let li = 0; li < model.layers.length; li++) {
    const r = refLayerForward(model.layers[li], model.params[li].w,
                              model.params[li].b, cur, b, h, w);
    if (li === model.layers.length - 1) {
      for (let i = 0; i < r.out.length; i++) r.out[i] = 1 / (1 + Math.exp(-r.out[i]));
    } else {
      for (let i = 0; i < r.out.length; i++) if (r.out[i] < 0) r.out[i] = 0;
    }
    cur = r.out;
    h = r.oh;
    w = r.ow;
    if (li === 2) {
      latent = r.out;
      lh = r.oh;
    }
  }
  return { recon: cur, latent, latentH: lh };
}

/** alpha * MSE + beta * CE in float64, matching the training objective. */
export function refLoss(
  model: Model, x: Float64Array, labels: Int32Array, b: number, img: number,
  alpha: number, beta: number,
): number {
  const { recon, latent, latentH } = refForward(model, x, b, img);
  let mse = 0;
  for (let i = 0; i < recon.length; i++) {
    const e = recon[i] - x[i];
    mse += e * e;
  }
  mse /= recon.length;

  const lc = 16;
  const spatial = latentH * latentH;
  let ce = 0;
  for (let bi = 0; bi < b; bi++) {
    const pooled = new Float64Array(lc);
    for (let p = 0; p < spatial; p++) {
      for (let c = 0; c < lc; c++) pooled[c] += latent[(bi * spatial + p) * lc + c];
    }
    for (let c = 0; c < lc; c++) pooled[c] /= spatial;
    const logits = new Float64Array(NUM_CLASSES);
    let mx = -Infinity;
    for (let k = 0; k < NUM_CLASSES; k++) {
      let z = model.headB[k];
      for (let c = 0; c < lc; c++) z += pooled[c] * model.headW[c * NUM_CLASSES + k];
      logits[k] = z;
      if (z > mx) mx = z;
    }
    let sum = 0;
    for (let k = 0; k < NUM_CLASSES; k++) sum += Math.exp(logits[k] - mx);
    ce -= logits[labels[bi]] - mx - Math.log(sum);
  }
  ce /= b;
  return alpha * mse + beta * ce;
}

const PALETTE = [
  [235, 30, 30], [30, 235, 30], [30, 30, 235], [235, 235, 30], [235, 30, 235],
  [30, 235, 235], [235, 130, 30], [130, 30, 235], [30, 130, 130], [200, 200, 200],
];

/**
 * Synthetic records in the 3073-byte label+channel-planes layout: each class
 * gets a base color, with a per-image brightness ramp and pixel noise on top.
 */
export function makeRecords(n: number, seed: number): Buffer {
  const rng = new Rng(seed);
  const buf = Buffer.alloc(n * RECORD_BYTES);
  for (let i = 0; i < n; i++) {
    const label = i % 10;
    const base = PALETTE[label];
    const slope = rng.uniform(-0.6, 0.6);
    const rec = i * RECORD_BYTES;
    buf[rec] = label;
    for (let ch = 0; ch < 3; ch++) {
      for (let y = 0; y < 32; y++) {
        for (let x = 0; x < 32; x++) {
          const ramp = slope * (x + y - 31);
          const v = base[ch] + ramp + rng.uniform(-12, 12);
          buf[rec + 1 + ch * 1024 + y * 32 + x] = Math.max(0, Math.min(255, Math.round(v)));
        }
      }
    }
  }
  return buf;
}

export function writeDataset(dir: string, n: number, seed: number, file = "data_batch_1.bin"): string {
  fs.writeFileSync(path.join(dir, file), makeRecords(n, seed));
  return dir;
}

/** Flat HWC -> CHW, promoting to float64. */
export function hwcToChw(src: ArrayLike<number>, h: number, w: number, c: number): Float64Array {
  const out = new Float64Array(h * w * c);
  for (let ci = 0; ci < c; ci++) {
    for (let y = 0; y < h; y++) {
      for (let x = 0; x < w; x++) out[(ci * h + y) * w + x] = src[(y * w + x) * c + ci];
    }
  }
  return out;
}
