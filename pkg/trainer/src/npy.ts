import fs from "fs";

/**
 * Minimal .npy (format version 1.0) I/O for little-endian float arrays;
 * just enough to exchange tensors with the numpy side for cross-checks.
 */

export function writeNpy(p: string, shape: number[], data: Float64Array): void {
  const dict = `{'descr': '<f8', 'fortran_order': False, 'shape': (${shape.join(", ")}${shape.length === 1 ? "," : ""}), }`;
  let headerLen = 10 + dict.length + 1;
  const pad = (64 - (headerLen % 64)) % 64;
  headerLen += pad;
  const buf = Buffer.alloc(headerLen + data.length * 8);
  buf.write("\x93NUMPY", 0, "latin1");
  buf.writeUInt8(1, 6);
  buf.writeUInt8(0, 7);
  buf.writeUInt16LE(headerLen - 10, 8);
  buf.write(dict + " ".repeat(pad) + "\n", 10, "latin1");
  for (let i = 0; i < data.length; i++) buf.writeDoubleLE(data[i], headerLen + i * 8);
  fs.writeFileSync(p, buf);
}

export function readNpy(p: string): { shape: number[]; data: Float64Array } {
  const buf = fs.readFileSync(p);
  if (buf.subarray(0, 6).toString("latin1") !== "\x93NUMPY") {
    throw new Error(`${p}: not an npy file`);
  }
  const major = buf.readUInt8(6);
  const headerLen = major === 1 ? buf.readUInt16LE(8) : buf.readUInt32LE(8);
  const headerEnd = (major === 1 ? 10 : 12) + headerLen;
  const header = buf.subarray(major === 1 ? 10 : 12, headerEnd).toString("latin1");
  const descr = /'descr':\s*'([^']+)'/.exec(header)?.[1];
  const shapeText = /'shape':\s*\(([^)]*)\)/.exec(header)?.[1] ?? "";
  if (/'fortran_order':\s*True/.test(header)) {
    throw new Error(`${p}: fortran order not supported`);
  }
  const shape = shapeText.split(",").map((s) => s.trim()).filter(Boolean).map(Number);
  const count = shape.reduce((a, b) => a * b, 1);
  const data = new Float64Array(count);
  if (descr === "<f8") {
    for (let i = 0; i < count; i++) data[i] = buf.readDoubleLE(headerEnd + i * 8);
  } else if (descr === "<f4") {
    for (let i = 0; i < count; i++) data[i] = buf.readFloatLE(headerEnd + i * 4);
  } else {
    throw new Error(`${p}: unsupported dtype ${descr}`);
  }
  return { shape, data };
}
