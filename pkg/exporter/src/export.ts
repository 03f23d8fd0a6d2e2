/**
 * Checkpoint-to-container conversion: map checkpoint tensors onto graph
 * layer entries, fold batch-norm statistics into their target convs
 * (w' = w*g/sqrt(v+eps), b' = (b-m)*g/sqrt(v+eps) + beta), and write a
 * VNWT container that binds cleanly.
 */

import { expectedEntries, loadGraphConfig } from "./graphconfig.js";
import { loadNameMap, matchPattern, substitute } from "./namemap.js";
import { Checkpoint, readSafetensors } from "./safetensors.js";
import { StoreEntry, WeightStore, writeVnwt } from "./vnwt.js";

export interface ExportOptions {
  ckpt: string;
  config: string;
  map: string;
  out: string;
}

export interface ExportReport {
  matched: { key: string; entry: string }[];
  folded: { conv: string; keys: string[]; eps: number }[];
  dropped: string[];
  entries: number;
  totalParams: number;
}

export class ExportError extends Error {}

const DEFAULT_BN_EPS = 1e-5;

function shapesEqual(a: number[], b: number[]): boolean {
  return a.length === b.length && a.every((v, i) => v === b[i]);
}

function checkpointEps(ckpt: Checkpoint): number | undefined {
  const raw = ckpt.metadata["bn_eps"];
  if (raw === undefined) return undefined;
  const eps = Number(raw);
  if (!Number.isFinite(eps) || eps < 0) {
    throw new ExportError(`checkpoint metadata bn_eps is not a number: ${raw}`);
  }
  return eps;
}

export function exportCheckpoint(opts: ExportOptions): ExportReport {
  const config = loadGraphConfig(opts.config);
  const nameMap = loadNameMap(opts.map);
  const ckpt = readSafetensors(opts.ckpt);
  const expected = expectedEntries(config);

  const assigned = new Map<string, { entry: StoreEntry; source: string }>();
  const consumed = new Set<string>();
  const matched: { key: string; entry: string }[] = [];

  for (const [pattern, target] of nameMap.weights) {
    for (const [key, tensor] of ckpt.tensors) {
      const capture = matchPattern(pattern, key);
      if (capture === null) continue;
      const entryName = substitute(target, capture);
      const wantDims = expected.get(entryName);
      if (!wantDims) {
        throw new ExportError(
          `pattern '${pattern}' maps '${key}' to unknown entry '${entryName}'`,
        );
      }
      const prev = assigned.get(entryName);
      if (prev) {
        throw new ExportError(
          `entry '${entryName}' matched twice: '${prev.source}' and '${key}'`,
        );
      }
      if (!shapesEqual(tensor.shape, wantDims)) {
        throw new ExportError(
          `dim mismatch: checkpoint '${key}' has [${tensor.shape}] but ` +
            `entry '${entryName}' needs [${wantDims}]`,
        );
      }
      assigned.set(entryName, {
        entry: { dims: [...tensor.shape], data: tensor.data },
        source: key,
      });
      consumed.add(key);
      matched.push({ key, entry: entryName });
    }
  }

  const folded: { conv: string; keys: string[]; eps: number }[] = [];
  for (const fold of nameMap.folds) {
    const weightName = `${fold.conv}.weight`;
    const biasName = `${fold.conv}.bias`;
    const weight = assigned.get(weightName);
    if (!weight) {
      throw new ExportError(
        `fold target '${fold.conv}' has no mapped weight entry '${weightName}'`,
      );
    }
    if (!expected.has(biasName)) {
      throw new ExportError(
        `fold target '${fold.conv}' declares no bias entry to absorb the shift`,
      );
    }
    const stats: Record<string, Float32Array> = {};
    for (const field of ["gamma", "beta", "mean", "var"] as const) {
      const key = fold[field];
      const tensor = ckpt.tensors.get(key);
      if (!tensor) {
        throw new ExportError(`fold for '${fold.conv}': checkpoint key '${key}' not found`);
      }
      const outCh = weight.entry.dims[0];
      if (!shapesEqual(tensor.shape, [outCh])) {
        throw new ExportError(
          `dim mismatch: BN key '${key}' has [${tensor.shape}] but ` +
            `conv '${fold.conv}' has ${outCh} output channels`,
        );
      }
      stats[field] = tensor.data;
      consumed.add(key);
    }
    const eps = fold.eps ?? checkpointEps(ckpt) ?? DEFAULT_BN_EPS;
    const outCh = weight.entry.dims[0];
    const perOut = weight.entry.data.length / outCh;
    const scale = new Float64Array(outCh);
    for (let o = 0; o < outCh; o++) {
      scale[o] = stats.gamma[o] / Math.sqrt(stats.var[o] + eps);
    }
    const foldedW = new Float32Array(weight.entry.data.length);
    for (let o = 0; o < outCh; o++) {
      for (let i = 0; i < perOut; i++) {
        foldedW[o * perOut + i] = Math.fround(weight.entry.data[o * perOut + i] * scale[o]);
      }
    }
    const oldBias = assigned.get(biasName);
    const foldedB = new Float32Array(outCh);
    for (let o = 0; o < outCh; o++) {
      const b0 = oldBias ? oldBias.entry.data[o] : 0.0;
      foldedB[o] = Math.fround((b0 - stats.mean[o]) * scale[o] + stats.beta[o]);
    }
    assigned.set(weightName, {
      entry: { dims: weight.entry.dims, data: foldedW },
      source: weight.source,
    });
    assigned.set(biasName, {
      entry: { dims: [outCh], data: foldedB },
      source: oldBias ? oldBias.source : `${fold.conv} (zero bias)`,
    });
    folded.push({
      conv: fold.conv,
      keys: [fold.gamma, fold.beta, fold.mean, fold.var],
      eps,
    });
  }

  // Zero-fill biases for layers whose checkpoint convs carry none.
  for (const [name, dims] of expected) {
    if (!assigned.has(name) && name.endsWith(".bias")) {
      const weightName = name.replace(/\.bias$/, ".weight");
      if (assigned.has(weightName)) {
        assigned.set(name, {
          entry: { dims: [...dims], data: new Float32Array(dims[0]) },
          source: "(zero-filled)",
        });
      }
    }
  }

  const missing = [...expected.keys()].filter((k) => !assigned.has(k)).sort();
  if (missing.length) {
    throw new ExportError(`unmatched graph entries: ${missing.join(", ")}`);
  }
  const dropped = [...ckpt.tensors.keys()].filter((k) => !consumed.has(k)).sort();

  // Write in config order so re-export is byte-identical.
  const store: WeightStore = new Map();
  let totalParams = 0;
  for (const name of expected.keys()) {
    const entry = assigned.get(name)!.entry;
    store.set(name, entry);
    totalParams += entry.data.length;
  }
  writeVnwt(opts.out, store);
  return {
    matched,
    folded,
    dropped,
    entries: store.size,
    totalParams,
  };
}
