import {
  ConvCache, LayerSpec, layerBackward, layerForward, outSize,
  reluBackwardInPlace, reluInPlace, sigmoidBackwardInPlace, sigmoidInPlace,
} from "./ops.js";
import { Rng } from "./rng.js";

export const IMG = 96;
export const LATENT: [number, number, number] = [23, 23, 16];
export const NUM_CLASSES = 10;

/** Fixed codec architecture; the serializer and loader validate against it. */
export function architecture(): LayerSpec[] {
  return [
    { kind: "conv", inCh: 3, outCh: 16, kh: 2, kw: 2, stride: 1 },
    { kind: "conv", inCh: 16, outCh: 16, kh: 3, kw: 3, stride: 2 },
    { kind: "conv", inCh: 16, outCh: 16, kh: 3, kw: 3, stride: 2 },
    { kind: "tconv", inCh: 16, outCh: 16, kh: 3, kw: 3, stride: 2 },
    { kind: "tconv", inCh: 16, outCh: 16, kh: 3, kw: 3, stride: 2 },
    { kind: "tconv", inCh: 16, outCh: 3, kh: 2, kw: 2, stride: 1 },
  ];
}

export interface LayerParams {
  w: Float32Array;  // GEMM layout, see ops.ts
  b: Float32Array;
}

export interface Model {
  layers: LayerSpec[];
  params: LayerParams[];
  /** classification head on the latent: global average pool then linear */
  headW: Float32Array;  // [16, NUM_CLASSES]
  headB: Float32Array;
}

export function weightCount(spec: LayerSpec): number {
  return spec.inCh * spec.outCh * spec.kh * spec.kw;
}

export function initModel(seed: number): Model {
  const rng = new Rng(seed);
  const layers = architecture();
  const params = layers.map((spec) => {
    const fanIn = spec.inCh * spec.kh * spec.kw;
    const fanOut = spec.outCh * spec.kh * spec.kw;
    const lim = Math.sqrt(6 / (fanIn + fanOut));
    const w = new Float32Array(weightCount(spec));
    for (let i = 0; i < w.length; i++) w[i] = rng.uniform(-lim, lim);
    return { w, b: new Float32Array(spec.outCh) };
  });
  const headW = new Float32Array(LATENT[2] * NUM_CLASSES);
  const hlim = Math.sqrt(6 / (LATENT[2] + NUM_CLASSES));
  for (let i = 0; i < headW.length; i++) headW[i] = rng.uniform(-hlim, hlim);
  return { layers, params, headW, headB: new Float32Array(NUM_CLASSES) };
}

export interface ForwardState {
  acts: Float32Array[];   // post-activation of every layer, acts[0] = input
  caches: ConvCache[];
  dims: Array<[number, number]>;  // spatial size entering each layer
  latent: Float32Array;   // alias of acts[3]
  recon: Float32Array;    // alias of acts[6]
}

/** Run all six layers on an NHWC batch [b, img, img, 3] in [0, 1]. */
export function forward(model: Model, x: Float32Array, b: number, img = IMG): ForwardState {
  const acts: Float32Array[] = [x];
  const caches: ConvCache[] = [];
  const dims: Array<[number, number]> = [];
  let cur = x;
  let h = img, w = img;
  model.layers.forEach((spec, li) => {
    dims.push([h, w]);
    const r = layerForward(spec, model.params[li].w, model.params[li].b, cur, b, h, w);
    if (li === model.layers.length - 1) sigmoidInPlace(r.out);
    else reluInPlace(r.out);
    acts.push(r.out);
    caches.push(r.cache);
    cur = r.out;
    h = r.oh;
    w = r.ow;
  });
  return { acts, caches, dims, latent: acts[3], recon: acts[6] };
}

/** Latent -> class probabilities. Returns the pooled vector too. */
export function headForward(model: Model, latent: Float32Array, b: number) {
  const lc = LATENT[2];
  const spatial = latent.length / (b * lc);
  const pooled = new Float32Array(b * lc);
  for (let bi = 0; bi < b; bi++) {
    const base = bi * spatial * lc;
    for (let p = 0; p < spatial; p++) {
      for (let c = 0; c < lc; c++) pooled[bi * lc + c] += latent[base + p * lc + c];
    }
  }
  for (let i = 0; i < pooled.length; i++) pooled[i] /= spatial;
  const probs = new Float32Array(b * NUM_CLASSES);
  for (let bi = 0; bi < b; bi++) {
    let mx = -Infinity;
    for (let k = 0; k < NUM_CLASSES; k++) {
      let z = model.headB[k];
      for (let c = 0; c < lc; c++) z += pooled[bi * lc + c] * model.headW[c * NUM_CLASSES + k];
      probs[bi * NUM_CLASSES + k] = z;
      if (z > mx) mx = z;
    }
    let sum = 0;
    for (let k = 0; k < NUM_CLASSES; k++) {
      const e = Math.exp(probs[bi * NUM_CLASSES + k] - mx);
      probs[bi * NUM_CLASSES + k] = e;
      sum += e;
    }
    for (let k = 0; k < NUM_CLASSES; k++) probs[bi * NUM_CLASSES + k] /= sum;
  }
  return { pooled, probs };
}

export interface Gradients {
  layers: { dw: Float32Array; db: Float32Array }[];
  headW: Float32Array;
  headB: Float32Array;
}

/**
 * Backward pass for loss = alpha * MSE(x, recon) + beta * CE(labels, head).
 * Returns gradients plus the two loss terms.
 */
export function backward(
  model: Model, st: ForwardState, x: Float32Array, b: number,
  labels: Int32Array, alpha: number, beta: number,
): { grads: Gradients; mse: number; ce: number } {
  const recon = st.recon;
  let mse = 0;
  const d = new Float32Array(recon.length);
  const scale = (alpha * 2) / recon.length;
  for (let i = 0; i < recon.length; i++) {
    const e = recon[i] - x[i];
    mse += e * e;
    d[i] = scale * e;
  }
  mse /= recon.length;

  const { pooled, probs } = headForward(model, st.latent, b);
  let ce = 0;
  const dlogits = new Float32Array(b * NUM_CLASSES);
  for (let bi = 0; bi < b; bi++) {
    const p = probs[bi * NUM_CLASSES + labels[bi]];
    ce -= Math.log(Math.max(p, 1e-12));
    for (let k = 0; k < NUM_CLASSES; k++) {
      dlogits[bi * NUM_CLASSES + k] =
        (beta / b) * (probs[bi * NUM_CLASSES + k] - (k === labels[bi] ? 1 : 0));
    }
  }
  ce /= b;

  const lc = LATENT[2];
  const headW = new Float32Array(model.headW.length);
  const headB = new Float32Array(NUM_CLASSES);
  const dpooled = new Float32Array(b * lc);
  for (let bi = 0; bi < b; bi++) {
    for (let k = 0; k < NUM_CLASSES; k++) {
      const g = dlogits[bi * NUM_CLASSES + k];
      headB[k] += g;
      for (let c = 0; c < lc; c++) {
        headW[c * NUM_CLASSES + k] += pooled[bi * lc + c] * g;
        dpooled[bi * lc + c] += model.headW[c * NUM_CLASSES + k] * g;
      }
    }
  }

  const grads: Gradients["layers"] = new Array(model.layers.length);
  let dOut: Float32Array = d;
  for (let li = model.layers.length - 1; li >= 0; li--) {
    const post = st.acts[li + 1];
    if (li === model.layers.length - 1) sigmoidBackwardInPlace(dOut, post);
    else reluBackwardInPlace(dOut, post);
    const [h, w] = st.dims[li];
    const [oh, ow] = outSize(model.layers[li], h, w);
    const g = layerBackward(model.layers[li], model.params[li].w,
                            st.caches[li], dOut, b, oh, ow);
    grads[li] = { dw: g.dw, db: g.db };
    dOut = g.dx;
    if (li === 3) {
      // g.dx is the decoder's gradient wrt the latent; the pooled head
      // contributes 1/spatial of its gradient to every latent position
      const spatial = st.dims[3][0] * st.dims[3][1];
      for (let bi = 0; bi < b; bi++) {
        const base = bi * spatial * lc;
        for (let p = 0; p < spatial; p++) {
          for (let c = 0; c < lc; c++) {
            dOut[base + p * lc + c] += dpooled[bi * lc + c] / spatial;
          }
        }
      }
    }
  }
  return { grads: { layers: grads, headW, headB }, mse, ce };
}

/** Encoder half only, for calibration and feature export. */
export function encode(model: Model, x: Float32Array, b: number): Float32Array {
  let cur = x;
  let h = IMG, w = IMG;
  for (let li = 0; li < 3; li++) {
    const r = layerForward(model.layers[li], model.params[li].w,
                           model.params[li].b, cur, b, h, w);
    reluInPlace(r.out);
    cur = r.out;
    h = r.oh;
    w = r.ow;
  }
  return cur;
}

/** Decoder half: latent NHWC [b, 23, 23, 16] -> image batch. */
export function decode(model: Model, latent: Float32Array, b: number): Float32Array {
  let cur = latent;
  let [h, w] = [LATENT[0], LATENT[1]];
  for (let li = 3; li < 6; li++) {
    const r = layerForward(model.layers[li], model.params[li].w,
                           model.params[li].b, cur, b, h, w);
    if (li === 5) sigmoidInPlace(r.out);
    else reluInPlace(r.out);
    cur = r.out;
    h = r.oh;
    w = r.ow;
  }
  return cur;
}
