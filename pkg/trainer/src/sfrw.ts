import fs from "fs";
import path from "path";
import { LayerSpec, outSize } from "./ops.js";
import { IMG, Model, architecture, weightCount } from "./model.js";

const MAGIC = "SFRW";
const VERSION = 1;

export class CorruptModelError extends Error {}

export interface ExportInfo {
  clipMin: number;
  clipMax: number;
  sigmaS: number;
}

/** conv GEMM layout [kh*kw*in, out] <-> on-disk (out, in, kh, kw). */
function convMatToDisk(spec: LayerSpec, m: Float32Array): Float32Array {
  const { inCh, outCh, kh, kw } = spec;
  const out = new Float32Array(m.length);
  for (let o = 0; o < outCh; o++)
    for (let c = 0; c < inCh; c++)
      for (let ki = 0; ki < kh; ki++)
        for (let kj = 0; kj < kw; kj++)
          out[((o * inCh + c) * kh + ki) * kw + kj] =
            m[((ki * kw + kj) * inCh + c) * outCh + o];
  return out;
}

function convDiskToMat(spec: LayerSpec, d: Float32Array): Float32Array {
  const { inCh, outCh, kh, kw } = spec;
  const out = new Float32Array(d.length);
  for (let o = 0; o < outCh; o++)
    for (let c = 0; c < inCh; c++)
      for (let ki = 0; ki < kh; ki++)
        for (let kj = 0; kj < kw; kj++)
          out[((ki * kw + kj) * inCh + c) * outCh + o] =
            d[((o * inCh + c) * kh + ki) * kw + kj];
  return out;
}

/** tconv GEMM layout [in, kh*kw*out] <-> on-disk (out, in, kh, kw). */
function tconvMatToDisk(spec: LayerSpec, m: Float32Array): Float32Array {
  const { inCh, outCh, kh, kw } = spec;
  const out = new Float32Array(m.length);
  for (let o = 0; o < outCh; o++)
    for (let c = 0; c < inCh; c++)
      for (let ki = 0; ki < kh; ki++)
        for (let kj = 0; kj < kw; kj++)
          out[((o * inCh + c) * kh + ki) * kw + kj] =
            m[c * kh * kw * outCh + (ki * kw + kj) * outCh + o];
  return out;
}

function tconvDiskToMat(spec: LayerSpec, d: Float32Array): Float32Array {
  const { inCh, outCh, kh, kw } = spec;
  const out = new Float32Array(d.length);
  for (let o = 0; o < outCh; o++)
    for (let c = 0; c < inCh; c++)
      for (let ki = 0; ki < kh; ki++)
        for (let kj = 0; kj < kw; kj++)
          out[c * kh * kw * outCh + (ki * kw + kj) * outCh + o] =
            d[((o * inCh + c) * kh + ki) * kw + kj];
  return out;
}

export function serialize(model: Model, info: ExportInfo): Uint8Array {
  if (!(info.clipMin < info.clipMax)) throw new CorruptModelError("clip range empty");
  if (!(info.sigmaS > 0)) throw new CorruptModelError("sigma_s must be > 0");
  let size = 12;
  for (const spec of model.layers) size += 21 + 4 * (weightCount(spec) + spec.outCh);
  size += 12;
  const buf = new Uint8Array(size);
  const view = new DataView(buf.buffer);
  buf.set([0x53, 0x46, 0x52, 0x57], 0); // "SFRW"
  view.setUint32(4, VERSION, true);
  view.setUint32(8, model.layers.length, true);
  let off = 12;
  model.layers.forEach((spec, li) => {
    view.setUint8(off, spec.kind === "conv" ? 0 : 1);
    view.setUint32(off + 1, spec.inCh, true);
    view.setUint32(off + 5, spec.outCh, true);
    view.setUint32(off + 9, spec.kh, true);
    view.setUint32(off + 13, spec.kw, true);
    view.setUint32(off + 17, spec.stride, true);
    off += 21;
    const w = spec.kind === "conv"
      ? convMatToDisk(spec, model.params[li].w)
      : tconvMatToDisk(spec, model.params[li].w);
    for (let i = 0; i < w.length; i++, off += 4) view.setFloat32(off, w[i], true);
    const b = model.params[li].b;
    for (let i = 0; i < b.length; i++, off += 4) view.setFloat32(off, b[i], true);
  });
  view.setFloat32(off, info.clipMin, true);
  view.setFloat32(off + 4, info.clipMax, true);
  view.setFloat32(off + 8, info.sigmaS, true);
  return buf;
}

export function deserialize(buf: Uint8Array): { model: Model; info: ExportInfo } {
  const view = new DataView(buf.buffer, buf.byteOffset, buf.byteLength);
  let off = 0;
  const take = (n: number) => {
    if (off + n > buf.length) throw new CorruptModelError("file truncated");
    const at = off;
    off += n;
    return at;
  };
  const m0 = take(4);
  if (String.fromCharCode(...buf.subarray(m0, m0 + 4)) !== MAGIC) {
    throw new CorruptModelError("bad magic");
  }
  const version = view.getUint32(take(4), true);
  if (version !== VERSION) throw new CorruptModelError(`unknown version ${version}`);
  const nLayers = view.getUint32(take(4), true);
  const layers: LayerSpec[] = [];
  const params: Model["params"] = [];
  let sawTconv = false;
  for (let li = 0; li < nLayers; li++) {
    const kindByte = view.getUint8(take(1));
    if (kindByte !== 0 && kindByte !== 1) {
      throw new CorruptModelError(`bad layer kind ${kindByte}`);
    }
    if (kindByte === 1) sawTconv = true;
    else if (sawTconv) throw new CorruptModelError("conv layer after tconv layers");
    const spec: LayerSpec = {
      kind: kindByte === 0 ? "conv" : "tconv",
      inCh: view.getUint32(take(4), true),
      outCh: view.getUint32(take(4), true),
      kh: view.getUint32(take(4), true),
      kw: view.getUint32(take(4), true),
      stride: view.getUint32(take(4), true),
    };
    const nw = weightCount(spec);
    const disk = new Float32Array(nw);
    let at = take(4 * nw);
    for (let i = 0; i < nw; i++, at += 4) disk[i] = view.getFloat32(at, true);
    const b = new Float32Array(spec.outCh);
    at = take(4 * spec.outCh);
    for (let i = 0; i < spec.outCh; i++, at += 4) b[i] = view.getFloat32(at, true);
    layers.push(spec);
    params.push({ w: spec.kind === "conv" ? convDiskToMat(spec, disk)
                                          : tconvDiskToMat(spec, disk), b });
  }
  const tr = take(12);
  if (off !== buf.length) throw new CorruptModelError("trailing bytes");
  const info: ExportInfo = {
    clipMin: view.getFloat32(tr, true),
    clipMax: view.getFloat32(tr + 4, true),
    sigmaS: view.getFloat32(tr + 8, true),
  };
  if (!(info.clipMin < info.clipMax)) throw new CorruptModelError("clip range empty");
  if (!(info.sigmaS > 0)) throw new CorruptModelError("sigma_s must be > 0");

  checkChain(layers);
  const ref = architecture();
  layers.forEach((spec, li) => {
    const want = ref[li];
    if (!want || spec.kind !== want.kind || spec.inCh !== want.inCh ||
        spec.outCh !== want.outCh || spec.kh !== want.kh ||
        spec.kw !== want.kw || spec.stride !== want.stride) {
      throw new CorruptModelError(`layer ${li} deviates from the fixed architecture`);
    }
  });
  if (layers.length !== ref.length) throw new CorruptModelError("wrong layer count");
  return { model: { layers, params, headW: new Float32Array(0), headB: new Float32Array(0) }, info };
}

function checkChain(layers: LayerSpec[]): void {
  let h = IMG, w = IMG, ch = 3;
  for (const spec of layers) {
    if (spec.inCh !== ch) throw new CorruptModelError("channel chain broken");
    try {
      [h, w] = outSize(spec, h, w);
    } catch {
      throw new CorruptModelError("shape chain broken");
    }
    ch = spec.outCh;
  }
  if (h !== IMG || w !== IMG || ch !== 3) {
    throw new CorruptModelError("shape chain does not return to the input size");
  }
}

/** Write-temp-then-rename so a crash never leaves a half-written file. */
export function exportModel(model: Model, info: ExportInfo, outPath: string): void {
  const buf = serialize(model, info);
  const tmp = path.join(path.dirname(outPath),
                        `.${path.basename(outPath)}.tmp-${process.pid}`);
  fs.writeFileSync(tmp, buf);
  fs.renameSync(tmp, outPath);
}

export function importModel(p: string): { model: Model; info: ExportInfo } {
  return deserialize(new Uint8Array(fs.readFileSync(p)));
}
