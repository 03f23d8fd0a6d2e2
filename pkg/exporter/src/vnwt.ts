/**
 * The engine's "VNWT" weight container (all little-endian):
 * magic "VNWT", u32 version=1, u32 entry count; per entry: u32 name
 * length, UTF-8 name, u8 dtype (0=f32), u32 ndim, ndim x u64 dims,
 * u32 CRC32 of the payload, f32 payload.
 */

import { readFileSync, writeFileSync } from "node:fs";
import { crc32 } from "./crc32.js";

export interface StoreEntry {
  dims: number[];
  data: Float32Array;
}

export type WeightStore = Map<string, StoreEntry>;

const MAGIC = 0x54574e56; // "VNWT" read as u32 LE

export function writeVnwt(path: string, store: WeightStore): void {
  const chunks: Buffer[] = [];
  const head = Buffer.alloc(12);
  head.write("VNWT", 0, "ascii");
  head.writeUInt32LE(1, 4);
  head.writeUInt32LE(store.size, 8);
  chunks.push(head);
  for (const [name, entry] of store) {
    const nameBytes = Buffer.from(name, "utf-8");
    const meta = Buffer.alloc(4 + nameBytes.length + 1 + 4 + 8 * entry.dims.length + 4);
    let pos = 0;
    meta.writeUInt32LE(nameBytes.length, pos);
    pos += 4;
    nameBytes.copy(meta, pos);
    pos += nameBytes.length;
    meta.writeUInt8(0, pos);
    pos += 1;
    meta.writeUInt32LE(entry.dims.length, pos);
    pos += 4;
    for (const d of entry.dims) {
      meta.writeBigUInt64LE(BigInt(d), pos);
      pos += 8;
    }
    const payload = Buffer.from(
      entry.data.buffer,
      entry.data.byteOffset,
      entry.data.length * 4,
    );
    meta.writeUInt32LE(crc32(payload), pos);
    chunks.push(meta, Buffer.from(payload));
  }
  writeFileSync(path, Buffer.concat(chunks));
}

export function readVnwt(path: string): WeightStore {
  const blob = readFileSync(path);
  if (blob.length < 12 || blob.readUInt32LE(0) !== MAGIC) {
    throw new Error(`${path}: not a VNWT container`);
  }
  if (blob.readUInt32LE(4) !== 1) {
    throw new Error(`${path}: unsupported VNWT version`);
  }
  const count = blob.readUInt32LE(8);
  const store: WeightStore = new Map();
  let pos = 12;
  const need = (n: number) => {
    if (pos + n > blob.length) throw new Error(`${path}: truncated container`);
  };
  for (let i = 0; i < count; i++) {
    need(4);
    const nameLen = blob.readUInt32LE(pos);
    pos += 4;
    need(nameLen + 5);
    const name = blob.subarray(pos, pos + nameLen).toString("utf-8");
    pos += nameLen;
    const dtype = blob.readUInt8(pos);
    pos += 1;
    if (dtype !== 0) throw new Error(`${path}: entry '${name}' unknown dtype`);
    const ndim = blob.readUInt32LE(pos);
    pos += 4;
    need(8 * ndim + 4);
    const dims: number[] = [];
    for (let d = 0; d < ndim; d++) {
      dims.push(Number(blob.readBigUInt64LE(pos)));
      pos += 8;
    }
    const crc = blob.readUInt32LE(pos);
    pos += 4;
    const bytes = 4 * dims.reduce((a, b) => a * b, 1);
    need(bytes);
    const payload = blob.subarray(pos, pos + bytes);
    pos += bytes;
    if (crc32(payload) !== crc) {
      throw new Error(`${path}: CRC mismatch in entry '${name}'`);
    }
    const copy = new Uint8Array(payload);
    store.set(name, { dims, data: new Float32Array(copy.buffer) });
  }
  if (pos !== blob.length) {
    throw new Error(`${path}: trailing bytes`);
  }
  return store;
}

export interface CoverageReport {
  missing: string[];
  extra: string[];
  mismatched: string[];
}

/** The bind contract seen through the file format: every expected entry
 * present with exact dims, nothing else. */
export function validateCoverage(
  store: WeightStore,
  expected: Map<string, number[]>,
): CoverageReport {
  const missing = [...expected.keys()].filter((k) => !store.has(k)).sort();
  const extra = [...store.keys()].filter((k) => !expected.has(k)).sort();
  const mismatched = [...expected.entries()]
    .filter(([k, dims]) => {
      const entry = store.get(k);
      return entry && JSON.stringify(entry.dims) !== JSON.stringify(dims);
    })
    .map(([k]) => k)
    .sort();
  return { missing, extra, mismatched };
}
