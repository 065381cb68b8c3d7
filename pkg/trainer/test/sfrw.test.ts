import fs from "fs";
import path from "path";
import { describe, expect, it } from "vitest";
import { initModel } from "../src/model.js";
import {
  CorruptModelError, ExportInfo, deserialize, exportModel, importModel, serialize,
} from "../src/sfrw.js";
import { tmpdir } from "./helpers.js";

// all three trailer values chosen exactly representable in float32
const INFO: ExportInfo = { clipMin: -1.25, clipMax: 3.5, sigmaS: 0.0625 };

function goodBytes(): Uint8Array {
  return serialize(initModel(5), INFO);
}

describe("serialize", () => {
  it("pins the little-endian layout", () => {
    const buf = goodBytes();
    const view = new DataView(buf.buffer);
    expect(String.fromCharCode(...buf.subarray(0, 4))).toBe("SFRW");
    expect(view.getUint32(4, true)).toBe(1);
    expect(view.getUint32(8, true)).toBe(6);
    // first layer header: conv, 3 -> 16, 2x2, stride 1
    expect(view.getUint8(12)).toBe(0);
    expect(view.getUint32(13, true)).toBe(3);
    expect(view.getUint32(17, true)).toBe(16);
    expect(view.getUint32(21, true)).toBe(2);
    expect(view.getUint32(25, true)).toBe(2);
    expect(view.getUint32(29, true)).toBe(1);
    // trailer
    expect(view.getFloat32(buf.length - 12, true)).toBeCloseTo(-1.25, 6);
    expect(view.getFloat32(buf.length - 8, true)).toBeCloseTo(3.5, 6);
    expect(view.getFloat32(buf.length - 4, true)).toBeCloseTo(0.0625, 6);
  });

  it("stores the first weight where the disk layout says it lives", () => {
    const m = initModel(5);
    const buf = serialize(m, INFO);
    const view = new DataView(buf.buffer);
    // disk order (out, in, kh, kw): element (o=0,c=0,ki=0,kj=0) maps to
    // GEMM index ((ki*kw+kj)*inCh+c)*outCh+o = 0 for the first conv
    expect(view.getFloat32(33, true)).toBe(m.params[0].w[0]);
    // disk index 1 is (o=0,c=0,ki=0,kj=1) -> GEMM index 1*3*16 + 0 + 0
    expect(view.getFloat32(37, true)).toBe(m.params[0].w[3 * 16]);
  });

  it("round trips bit for bit", () => {
    const buf = goodBytes();
    const { model, info } = deserialize(buf);
    expect(info).toEqual(INFO);
    const again = serialize({ ...model }, info);
    expect(Buffer.compare(Buffer.from(buf), Buffer.from(again))).toBe(0);
    const orig = initModel(5);
    for (let li = 0; li < orig.layers.length; li++) {
      expect(model.params[li].w).toEqual(orig.params[li].w);
      expect(model.params[li].b).toEqual(orig.params[li].b);
    }
  });

  it("refuses an empty clip range or nonpositive sigma", () => {
    const m = initModel(5);
    expect(() => serialize(m, { clipMin: 1, clipMax: 1, sigmaS: 0.1 })).toThrow(CorruptModelError);
    expect(() => serialize(m, { clipMin: 0, clipMax: 1, sigmaS: 0 })).toThrow(CorruptModelError);
    expect(() => serialize(m, { clipMin: 0, clipMax: 1, sigmaS: -2 })).toThrow(CorruptModelError);
  });
});

describe("deserialize rejections", () => {
  const cases: Array<[string, (b: Buffer) => Buffer]> = [
    ["bad magic", (b) => { b[0] = 0x58; return b; }],
    ["unknown version", (b) => { b.writeUInt32LE(2, 4); return b; }],
    ["bad layer kind", (b) => { b[12] = 7; return b; }],
    ["tampered layer count", (b) => { b.writeUInt32LE(5, 8); return b; }],
    ["oversized kernel field", (b) => { b.writeUInt32LE(1 << 20, 21); return b; }],
    ["truncated header", (b) => b.subarray(0, 9)],
    ["truncated mid-weights", (b) => b.subarray(0, 40)],
    ["truncated trailer", (b) => b.subarray(0, b.length - 4)],
    ["trailing byte", (b) => Buffer.concat([b, Buffer.from([0])])],
    ["kind flip makes conv follow tconv", (b) => { b[12] = 1; return b; }],
  ];
  for (const [name, mutate] of cases) {
    it(name, () => {
      const bad = mutate(Buffer.from(goodBytes()));
      expect(() => deserialize(new Uint8Array(bad))).toThrow(CorruptModelError);
    });
  }

  it("rejects a stored empty clip range", () => {
    const buf = Buffer.from(goodBytes());
    buf.writeFloatLE(9.0, buf.length - 12); // clipMin above clipMax
    expect(() => deserialize(new Uint8Array(buf))).toThrow(/clip/);
  });

  it("rejects a stored nonpositive sigma", () => {
    const buf = Buffer.from(goodBytes());
    buf.writeFloatLE(0.0, buf.length - 4);
    expect(() => deserialize(new Uint8Array(buf))).toThrow(/sigma/);
  });
});

describe("exportModel", () => {
  it("writes atomically and reloads identically", () => {
    const dir = tmpdir();
    const out = path.join(dir, "model.sfrw");
    const m = initModel(6);
    exportModel(m, INFO, out);
    expect(fs.readdirSync(dir)).toEqual(["model.sfrw"]); // no temp residue
    const back = importModel(out);
    expect(back.info).toEqual(INFO);
    for (let li = 0; li < m.layers.length; li++) {
      expect(back.model.params[li].w).toEqual(m.params[li].w);
    }
    fs.rmSync(dir, { recursive: true });
  });
});
