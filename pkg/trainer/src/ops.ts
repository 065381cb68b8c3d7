import { matmul } from "./backend.js";

/**
 * Layer geometry. Activations live in flat NHWC buffers ([batch, h, w, ch]);
 * weights live in the GEMM layout of the op that consumes them:
 * conv [kh*kw*inCh, outCh], tconv [inCh, kh*kw*outCh]. The serializer is
 * the only place the on-disk (out, in, kh, kw) order appears.
 */
export interface LayerSpec {
  kind: "conv" | "tconv";
  inCh: number;
  outCh: number;
  kh: number;
  kw: number;
  stride: number;
}

export function outSize(spec: LayerSpec, h: number, w: number): [number, number] {
  if (spec.kind === "conv") {
    if (h < spec.kh || w < spec.kw) {
      throw new Error(`input ${h}x${w} smaller than ${spec.kh}x${spec.kw} kernel`);
    }
    return [
      Math.floor((h - spec.kh) / spec.stride) + 1,
      Math.floor((w - spec.kw) / spec.stride) + 1,
    ];
  }
  return [(h - 1) * spec.stride + spec.kh, (w - 1) * spec.stride + spec.kw];
}

/**
 * Gather sliding windows of x [b, bigH, bigW, ch] into a patch matrix
 * [b*smallH*smallW, kh*kw*ch]; channels are contiguous per (ki, kj) tap so
 * rows copy in ch-sized runs.
 */
export function im2col(
  x: Float32Array, b: number, bigH: number, bigW: number, ch: number,
  kh: number, kw: number, stride: number,
): Float32Array {
  const smallH = Math.floor((bigH - kh) / stride) + 1;
  const smallW = Math.floor((bigW - kw) / stride) + 1;
  const cols = kh * kw * ch;
  const out = new Float32Array(b * smallH * smallW * cols);
  let r = 0;
  for (let bi = 0; bi < b; bi++) {
    const base = bi * bigH * bigW * ch;
    for (let i = 0; i < smallH; i++) {
      for (let j = 0; j < smallW; j++, r++) {
        let dst = r * cols;
        for (let ki = 0; ki < kh; ki++) {
          let src = base + ((i * stride + ki) * bigW + j * stride) * ch;
          for (let kj = 0; kj < kw; kj++, src += ch, dst += ch) {
            out.set(x.subarray(src, src + ch), dst);
          }
        }
      }
    }
  }
  return out;
}

/** Scatter-add inverse of im2col: patches accumulate back into the big map. */
export function col2im(
  p: Float32Array, b: number, bigH: number, bigW: number, ch: number,
  kh: number, kw: number, stride: number,
): Float32Array {
  const smallH = Math.floor((bigH - kh) / stride) + 1;
  const smallW = Math.floor((bigW - kw) / stride) + 1;
  const cols = kh * kw * ch;
  const out = new Float32Array(b * bigH * bigW * ch);
  let r = 0;
  for (let bi = 0; bi < b; bi++) {
    const base = bi * bigH * bigW * ch;
    for (let i = 0; i < smallH; i++) {
      for (let j = 0; j < smallW; j++, r++) {
        let src = r * cols;
        for (let ki = 0; ki < kh; ki++) {
          let dst = base + ((i * stride + ki) * bigW + j * stride) * ch;
          for (let kj = 0; kj < kw; kj++, dst += ch) {
            for (let c = 0; c < ch; c++) out[dst + c] += p[src++];
          }
        }
      }
    }
  }
  return out;
}

export interface ConvCache {
  patches: Float32Array;  // conv: im2col(x); tconv: x itself
  rows: number;
  h: number;
  w: number;
}

/** Forward pass of one layer; returns pre-activation NHWC plus GEMM inputs. */
export function layerForward(
  spec: LayerSpec, w: Float32Array, bias: Float32Array,
  x: Float32Array, b: number, h: number, wd: number,
): { out: Float32Array; cache: ConvCache; oh: number; ow: number } {
  const [oh, ow] = outSize(spec, h, wd);
  const kk = spec.kh * spec.kw;
  let out: Float32Array;
  let cache: ConvCache;
  if (spec.kind === "conv") {
    const p = im2col(x, b, h, wd, spec.inCh, spec.kh, spec.kw, spec.stride);
    const rows = b * oh * ow;
    out = matmul(p, w, rows, kk * spec.inCh, spec.outCh);
    cache = { patches: p, rows, h, w: wd };
  } else {
    const rows = b * h * wd;
    const g = matmul(x, w, rows, spec.inCh, kk * spec.outCh);
    out = col2im(g, b, oh, ow, spec.outCh, spec.kh, spec.kw, spec.stride);
    cache = { patches: x, rows, h, w: wd };
  }
  for (let i = 0; i < out.length; i++) out[i] += bias[i % spec.outCh];
  return { out, cache, oh, ow };
}

export interface LayerGrads {
  dw: Float32Array;
  db: Float32Array;
  dx: Float32Array;
}

/** Gradients of layerForward given dOut in NHWC (pre-activation grad). */
export function layerBackward(
  spec: LayerSpec, w: Float32Array, cache: ConvCache,
  dOut: Float32Array, b: number, oh: number, ow: number,
): LayerGrads {
  const kk = spec.kh * spec.kw;
  const db = new Float32Array(spec.outCh);
  for (let i = 0; i < dOut.length; i++) db[i % spec.outCh] += dOut[i];
  if (spec.kind === "conv") {
    const cols = kk * spec.inCh;
    const dw = matmul(cache.patches, dOut, cols, cache.rows, spec.outCh, true);
    const dp = matmul(dOut, w, cache.rows, spec.outCh, cols, false, true);
    const dx = col2im(dp, b, cache.h, cache.w, spec.inCh,
                      spec.kh, spec.kw, spec.stride);
    return { dw, db, dx };
  }
  // tconv: gather dOut with the same window geometry, then one GEMM each way
  const q = im2col(dOut, b, oh, ow, spec.outCh, spec.kh, spec.kw, spec.stride);
  const dw = matmul(cache.patches, q, spec.inCh, cache.rows, kk * spec.outCh, true);
  const dx = matmul(q, w, cache.rows, kk * spec.outCh, spec.inCh, false, true);
  return { dw, db, dx };
}

export function reluInPlace(a: Float32Array): void {
  for (let i = 0; i < a.length; i++) if (a[i] < 0) a[i] = 0;
}

/** dPre = dPost masked by the post-activation (relu' via output sign). */
export function reluBackwardInPlace(d: Float32Array, post: Float32Array): void {
  for (let i = 0; i < d.length; i++) if (post[i] <= 0) d[i] = 0;
}

export function sigmoidInPlace(a: Float32Array): void {
  for (let i = 0; i < a.length; i++) a[i] = 1 / (1 + Math.exp(-a[i]));
}

export function sigmoidBackwardInPlace(d: Float32Array, post: Float32Array): void {
  for (let i = 0; i < d.length; i++) d[i] *= post[i] * (1 - post[i]);
}
