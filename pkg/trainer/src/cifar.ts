import fs from "fs";
import path from "path";
import { IMG } from "./model.js";

export const RECORD_BYTES = 3073; // label byte + 3 * 1024 channel bytes
const SRC = 32;

export interface Dataset {
  /** NHWC float batch, one IMG x IMG x 3 image per record, values in [0, 1] */
  images: Float32Array;
  labels: Int32Array;
  count: number;
}

/**
 * Bilinear upscale with half-pixel centers, per channel, straight from the
 * record's channel-major bytes into an NHWC slot of the output buffer.
 */
function resizeInto(rec: Uint8Array, out: Float32Array, base: number): void {
  const scale = SRC / IMG;
  for (let y = 0; y < IMG; y++) {
    const sy = Math.min(Math.max((y + 0.5) * scale - 0.5, 0), SRC - 1);
    const y0 = Math.floor(sy);
    const y1 = Math.min(y0 + 1, SRC - 1);
    const fy = sy - y0;
    for (let x = 0; x < IMG; x++) {
      const sx = Math.min(Math.max((x + 0.5) * scale - 0.5, 0), SRC - 1);
      const x0 = Math.floor(sx);
      const x1 = Math.min(x0 + 1, SRC - 1);
      const fx = sx - x0;
      for (let c = 0; c < 3; c++) {
        const plane = 1 + c * SRC * SRC;
        const v =
          rec[plane + y0 * SRC + x0] * (1 - fy) * (1 - fx) +
          rec[plane + y0 * SRC + x1] * (1 - fy) * fx +
          rec[plane + y1 * SRC + x0] * fy * (1 - fx) +
          rec[plane + y1 * SRC + x1] * fy * fx;
        out[base + (y * IMG + x) * 3 + c] = v / 255;
      }
    }
  }
}

export function readBatchFile(p: string, limit?: number): Dataset {
  const raw = fs.readFileSync(p);
  if (raw.length === 0 || raw.length % RECORD_BYTES !== 0) {
    throw new Error(`${p}: size ${raw.length} is not a multiple of ${RECORD_BYTES}`);
  }
  let count = raw.length / RECORD_BYTES;
  if (limit !== undefined) count = Math.min(count, limit);
  const images = new Float32Array(count * IMG * IMG * 3);
  const labels = new Int32Array(count);
  for (let r = 0; r < count; r++) {
    const rec = raw.subarray(r * RECORD_BYTES, (r + 1) * RECORD_BYTES);
    labels[r] = rec[0];
    resizeInto(rec, images, r * IMG * IMG * 3);
  }
  return { images, labels, count };
}

/** Read every *.bin under dir (sorted) up to `limit` records total. */
export function readDir(dir: string, limit?: number): Dataset {
  const files = fs.readdirSync(dir).filter((f) => f.endsWith(".bin")).sort();
  if (files.length === 0) throw new Error(`no .bin batch files in ${dir}`);
  const parts: Dataset[] = [];
  let total = 0;
  for (const f of files) {
    if (limit !== undefined && total >= limit) break;
    const d = readBatchFile(path.join(dir, f),
                            limit === undefined ? undefined : limit - total);
    parts.push(d);
    total += d.count;
  }
  const images = new Float32Array(total * IMG * IMG * 3);
  const labels = new Int32Array(total);
  let at = 0;
  for (const d of parts) {
    images.set(d.images, at * IMG * IMG * 3);
    labels.set(d.labels, at);
    at += d.count;
  }
  return { images, labels, count: total };
}

/** View of image i as its own Float32Array (no copy). */
export function imageAt(ds: Dataset, i: number): Float32Array {
  const n = IMG * IMG * 3;
  return ds.images.subarray(i * n, (i + 1) * n);
}
