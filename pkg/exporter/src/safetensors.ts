/**
 * Minimal safetensors reader/writer (f32 tensors only).
 *
 * Layout: u64 little-endian header length, UTF-8 JSON header mapping
 * tensor names to {dtype, shape, data_offsets:[begin,end]} (offsets
 * relative to the data section), optional "__metadata__" string map,
 * then the raw data section.
 */

import { readFileSync, writeFileSync } from "node:fs";

export interface CheckpointTensor {
  shape: number[];
  data: Float32Array;
}

export interface Checkpoint {
  tensors: Map<string, CheckpointTensor>;
  metadata: Record<string, string>;
}

interface HeaderEntry {
  dtype: string;
  shape: number[];
  data_offsets: [number, number];
}

export function readSafetensors(path: string): Checkpoint {
  const blob = readFileSync(path);
  if (blob.length < 8) {
    throw new Error(`${path}: too short for a safetensors file`);
  }
  const view = new DataView(blob.buffer, blob.byteOffset, blob.byteLength);
  const headerLen = Number(view.getBigUint64(0, true));
  if (8 + headerLen > blob.length) {
    throw new Error(`${path}: truncated safetensors header`);
  }
  const header = JSON.parse(blob.subarray(8, 8 + headerLen).toString("utf-8"));
  const dataStart = 8 + headerLen;
  const tensors = new Map<string, CheckpointTensor>();
  let metadata: Record<string, string> = {};
  for (const [name, entry] of Object.entries(header)) {
    if (name === "__metadata__") {
      metadata = entry as Record<string, string>;
      continue;
    }
    const { dtype, shape, data_offsets } = entry as HeaderEntry;
    if (dtype !== "F32") {
      throw new Error(`${path}: tensor '${name}' has unsupported dtype ${dtype}`);
    }
    const [begin, end] = data_offsets;
    const count = shape.reduce((a, b) => a * b, 1);
    if (end - begin !== count * 4) {
      throw new Error(`${path}: tensor '${name}' offsets do not match shape`);
    }
    const bytes = blob.subarray(dataStart + begin, dataStart + end);
    if (bytes.length !== count * 4) {
      throw new Error(`${path}: tensor '${name}' data truncated`);
    }
    // copy to a fresh aligned buffer before viewing as f32
    const copy = new Uint8Array(bytes);
    tensors.set(name, {
      shape: [...shape],
      data: new Float32Array(copy.buffer, 0, count),
    });
  }
  return { tensors, metadata };
}

export function writeSafetensors(
  path: string,
  tensors: Map<string, CheckpointTensor>,
  metadata?: Record<string, string>,
): void {
  const header: Record<string, unknown> = {};
  if (metadata && Object.keys(metadata).length > 0) {
    header["__metadata__"] = metadata;
  }
  let offset = 0;
  const chunks: Uint8Array[] = [];
  for (const [name, tensor] of tensors) {
    const bytes = new Uint8Array(
      tensor.data.buffer,
      tensor.data.byteOffset,
      tensor.data.length * 4,
    );
    header[name] = {
      dtype: "F32",
      shape: tensor.shape,
      data_offsets: [offset, offset + bytes.length],
    };
    chunks.push(bytes);
    offset += bytes.length;
  }
  const headerBytes = Buffer.from(JSON.stringify(header), "utf-8");
  const lenPrefix = Buffer.alloc(8);
  new DataView(lenPrefix.buffer).setBigUint64(0, BigInt(headerBytes.length), true);
  writeFileSync(path, Buffer.concat([lenPrefix, headerBytes, ...chunks.map(Buffer.from)]));
}
