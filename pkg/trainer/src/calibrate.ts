import { Dataset, imageAt } from "./cifar.js";
import { IMG, LATENT, Model, decode, encode } from "./model.js";

const LEVELS = 255;

/** Linear-interpolated percentile of a sorted array, q in [0, 1]. */
function percentile(sorted: Float32Array, q: number): number {
  const pos = q * (sorted.length - 1);
  const lo = Math.floor(pos);
  const hi = Math.ceil(pos);
  if (lo === hi) return sorted[lo];
  return sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo);
}

/**
 * Feature quantizer range: 0.1% / 99.9% percentiles of the latent values
 * over the given images, so at most 0.2% of samples clip.
 */
export function computeClipRange(
  model: Model, ds: Dataset, batch = 64,
): { clipMin: number; clipMax: number } {
  const latSize = LATENT[0] * LATENT[1] * LATENT[2];
  const all = new Float32Array(ds.count * latSize);
  for (let at = 0; at < ds.count; at += batch) {
    const b = Math.min(batch, ds.count - at);
    const x = ds.images.subarray(at * IMG * IMG * 3, (at + b) * IMG * IMG * 3);
    all.set(encode(model, x, b), at * latSize);
  }
  all.sort();
  // round to f32 here so sigma_s gets calibrated through exactly the grid
  // a reader of the exported file will reconstruct
  const clipMin = Math.fround(percentile(all, 0.001));
  const clipMax = Math.fround(percentile(all, 0.999));
  if (!(clipMin < clipMax)) {
    throw new Error("latent range collapsed; model did not train into a usable codec");
  }
  return { clipMin, clipMax };
}

export function quantizeFeatures(
  feat: Float32Array, clipMin: number, clipMax: number,
): Float32Array {
  const span = clipMax - clipMin;
  const out = new Float32Array(feat.length);
  for (let i = 0; i < feat.length; i++) {
    const clipped = Math.min(Math.max(feat[i], clipMin), clipMax);
    const level = Math.round(((clipped - clipMin) / span) * LEVELS);
    out[i] = clipMin + (level / LEVELS) * span;
  }
  return out;
}

/**
 * Deployment-path noise scale: RMS pixel error of
 * decode(quantize(encode(x8))) against the 8-bit reference x8, over a
 * held-out batch. This is the value the receiver uses as its observation
 * noise, so it must be measured through the same quantizers it will see.
 */
export function computeSigmaS(
  model: Model, holdout: Dataset, clipMin: number, clipMax: number, batch = 64,
): number {
  let sse = 0;
  let n = 0;
  for (let at = 0; at < holdout.count; at += batch) {
    const b = Math.min(batch, holdout.count - at);
    const x8 = new Float32Array(b * IMG * IMG * 3);
    for (let i = 0; i < b; i++) {
      const src = imageAt(holdout, at + i);
      const dst = i * IMG * IMG * 3;
      for (let j = 0; j < src.length; j++) {
        x8[dst + j] = Math.round(src[j] * 255) / 255;
      }
    }
    const feat = encode(model, x8, b);
    const recon = decode(model, quantizeFeatures(feat, clipMin, clipMax), b);
    for (let i = 0; i < recon.length; i++) {
      const e = recon[i] - x8[i];
      sse += e * e;
    }
    n += recon.length;
  }
  return Math.sqrt(sse / n);
}
