import * as tf from "@tensorflow/tfjs";
import { setWasmPaths } from "@tensorflow/tfjs-backend-wasm";
import { createRequire } from "module";
import path from "path";

let ready: Promise<string> | null = null;

/**
 * Select the fastest available backend once per process. The wasm backend
 * carries its binary inside the npm package, so this works offline; if it
 * cannot initialize we fall back to the plain JS kernels.
 */
export function initBackend(): Promise<string> {
  if (!ready) {
    ready = (async () => {
      try {
        const require = createRequire(import.meta.url);
        const pkg = require.resolve("@tensorflow/tfjs-backend-wasm/package.json");
        setWasmPaths(path.join(path.dirname(pkg), "dist") + path.sep);
        await tf.setBackend("wasm");
        await tf.ready();
      } catch {
        await tf.setBackend("cpu");
        await tf.ready();
      }
      return tf.getBackend();
    })();
  }
  return ready;
}

/** C = A(m,k) . B(k,n), flat row-major buffers in and out. */
export function matmul(
  a: Float32Array, b: Float32Array,
  m: number, k: number, n: number,
  transposeA = false, transposeB = false,
): Float32Array {
  const out = tf.tidy(() => {
    const ta = tf.tensor2d(a, transposeA ? [k, m] : [m, k]);
    const tb = tf.tensor2d(b, transposeB ? [n, k] : [k, n]);
    return tf.matMul(ta, tb, transposeA, transposeB);
  });
  const res = out.dataSync() as Float32Array;
  out.dispose();
  return res;
}
