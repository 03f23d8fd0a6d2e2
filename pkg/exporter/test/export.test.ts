import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import { crc32 } from "../src/crc32.js";
import { exportCheckpoint, ExportError } from "../src/export.js";
import { expectedEntries, loadGraphConfig } from "../src/graphconfig.js";
import { matchPattern, substitute } from "../src/namemap.js";
import {
  CheckpointTensor,
  readSafetensors,
  writeSafetensors,
} from "../src/safetensors.js";
import { readVnwt, validateCoverage, writeVnwt } from "../src/vnwt.js";

/** Small deterministic PRNG so expected values are reproducible. */
function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function randomF32(n: number, rng: () => number, scale = 0.1): Float32Array {
  const out = new Float32Array(n);
  for (let i = 0; i < n; i++) out[i] = Math.fround((rng() * 2 - 1) * scale);
  return out;
}

const TINY_CONFIG = {
  name: "export_toy",
  input_shape: [3, 4, 8, 8],
  layers: [
    {
      name: "enc.c1",
      kind: "conv3d",
      inputs: ["input"],
      params: {
        in_ch: 3, out_ch: 8, kernel: [1, 3, 3], stride: [1, 1, 1],
        padding: [0, 1, 1], dilation: [1, 1, 1], groups: 1, bias: true,
      },
      scope: "encoder",
      bn: "enc.c1.bn",
    },
    { name: "enc.r1", kind: "relu", inputs: ["enc.c1"], params: {} },
    {
      name: "enc.c2",
      kind: "conv3d",
      inputs: ["enc.r1"],
      params: {
        in_ch: 8, out_ch: 8, kernel: [3, 3, 3], stride: [1, 1, 1],
        padding: [1, 1, 1], dilation: [1, 1, 1], groups: 2, bias: true,
      },
      scope: "encoder",
      bn: "enc.c2.bn",
    },
    { name: "pool", kind: "adaptive_pool_t", inputs: ["enc.c2"], params: { t_out: 1 } },
    { name: "head", kind: "pointwise", inputs: ["pool"], params: { in_ch: 8, out_ch: 1, bias: true } },
    { name: "sig", kind: "sigmoid", inputs: ["head"], params: {} },
  ],
  taps: { saliency: "sig" },
  meta: { variant: "a" },
};

interface Fixture {
  dir: string;
  configPath: string;
  ckptPath: string;
  mapPath: string;
  outPath: string;
  tensors: Map<string, CheckpointTensor>;
}

function makeFixture(
  opts: {
    bnStats?: { gamma: number[]; beta: number[]; mean: number[]; var: number[] };
    metadata?: Record<string, string>;
    foldEps?: number;
    dropExtra?: boolean;
    weightScale?: number;
  } = {},
): Fixture {
  const dir = mkdtempSync(join(tmpdir(), "vnwt-export-"));
  const configPath = join(dir, "graph.json");
  writeFileSync(configPath, JSON.stringify(TINY_CONFIG, null, 2));

  const rng = mulberry32(1234);
  const scale = opts.weightScale ?? 0.1;
  const tensors = new Map<string, CheckpointTensor>();
  tensors.set("backbone.stage1.conv.weight", {
    shape: [8, 3, 1, 3, 3],
    data: randomF32(8 * 3 * 9, rng, scale),
  });
  tensors.set("backbone.stage1.conv.bias", {
    shape: [8],
    data: randomF32(8, rng, scale),
  });
  tensors.set("backbone.stage2.conv.weight", {
    shape: [8, 4, 3, 3, 3],
    data: randomF32(8 * 4 * 27, rng, scale),
  });
  // stage2 has no checkpoint bias: the fold supplies it
  tensors.set("predictor.weight", { shape: [1, 8, 1, 1, 1], data: randomF32(8, rng, scale) });
  tensors.set("predictor.bias", { shape: [1], data: randomF32(1, rng, scale) });
  const stats = opts.bnStats ?? {
    gamma: Array.from(randomF32(8, rng, 1), (v) => v + 1.5),
    beta: Array.from(randomF32(8, rng, 0.5)),
    mean: Array.from(randomF32(8, rng, 0.5)),
    var: Array.from(randomF32(8, rng, 0.5), (v) => Math.abs(v) + 0.5),
  };
  tensors.set("backbone.stage2.bn.weight", { shape: [8], data: Float32Array.from(stats.gamma) });
  tensors.set("backbone.stage2.bn.bias", { shape: [8], data: Float32Array.from(stats.beta) });
  tensors.set("backbone.stage2.bn.running_mean", { shape: [8], data: Float32Array.from(stats.mean) });
  tensors.set("backbone.stage2.bn.running_var", { shape: [8], data: Float32Array.from(stats.var) });
  if (opts.dropExtra !== false) {
    tensors.set("classifier.fc.weight", { shape: [10, 8], data: randomF32(80, rng) });
  }
  const ckptPath = join(dir, "model.safetensors");
  writeSafetensors(ckptPath, tensors, opts.metadata);

  const nameMap = {
    weights: [
      ["backbone.stage1.conv.weight", "enc.c1.weight"],
      ["backbone.stage1.conv.bias", "enc.c1.bias"],
      ["backbone.stage2.conv.weight", "enc.c2.weight"],
      ["predictor.*", "head.*"],
    ],
    folds: [
      {
        conv: "enc.c2",
        gamma: "backbone.stage2.bn.weight",
        beta: "backbone.stage2.bn.bias",
        mean: "backbone.stage2.bn.running_mean",
        var: "backbone.stage2.bn.running_var",
        ...(opts.foldEps !== undefined ? { eps: opts.foldEps } : {}),
      },
    ],
  };
  const mapPath = join(dir, "map.json");
  writeFileSync(mapPath, JSON.stringify(nameMap, null, 2));
  return { dir, configPath, ckptPath, mapPath, outPath: join(dir, "model.vnwt"), tensors };
}

describe("safetensors", () => {
  it("roundtrips tensors and metadata", () => {
    const dir = mkdtempSync(join(tmpdir(), "st-"));
    const path = join(dir, "x.safetensors");
    const tensors = new Map<string, CheckpointTensor>([
      ["a", { shape: [2, 3], data: Float32Array.from([1, 2, 3, 4, 5, 6]) }],
      ["b", { shape: [1], data: Float32Array.from([9]) }],
    ]);
    writeSafetensors(path, tensors, { bn_eps: "0.001" });
    const back = readSafetensors(path);
    expect(back.metadata.bn_eps).toBe("0.001");
    expect([...back.tensors.get("a")!.data]).toEqual([1, 2, 3, 4, 5, 6]);
    expect(back.tensors.get("b")!.shape).toEqual([1]);
  });
});

describe("vnwt container", () => {
  it("roundtrips and validates CRCs", () => {
    const dir = mkdtempSync(join(tmpdir(), "vnwt-"));
    const path = join(dir, "w.vnwt");
    const store = new Map([
      ["x.weight", { dims: [2, 2], data: Float32Array.from([1, 2, 3, 4]) }],
    ]);
    writeVnwt(path, store);
    const back = readVnwt(path);
    expect([...back.get("x.weight")!.data]).toEqual([1, 2, 3, 4]);

    const blob = readFileSync(path);
    blob[blob.length - 2] ^= 0xff;
    const bad = join(dir, "bad.vnwt");
    writeFileSync(bad, blob);
    expect(() => readVnwt(bad)).toThrow(/CRC mismatch/);
  });
});

describe("name map patterns", () => {
  it("matches exact keys and single wildcards", () => {
    expect(matchPattern("a.b", "a.b")).toBe("");
    expect(matchPattern("a.b", "a.c")).toBeNull();
    expect(matchPattern("enc.*.w", "enc.stage1.w")).toBe("stage1");
    expect(matchPattern("enc.*.w", "dec.stage1.w")).toBeNull();
    expect(substitute("layers.*.weight", "c7")).toBe("layers.c7.weight");
  });
});

describe("exportCheckpoint", () => {
  it("produces a container that covers the graph exactly", () => {
    const fx = makeFixture();
    const report = exportCheckpoint({
      ckpt: fx.ckptPath, config: fx.configPath, map: fx.mapPath, out: fx.outPath,
    });
    const store = readVnwt(fx.outPath);
    const expected = expectedEntries(loadGraphConfig(fx.configPath));
    const coverage = validateCoverage(store, expected);
    expect(coverage.missing).toEqual([]);
    expect(coverage.extra).toEqual([]);
    expect(coverage.mismatched).toEqual([]);
    expect(report.entries).toBe(expected.size);
    expect(report.dropped).toEqual(["classifier.fc.weight"]);
    expect(report.folded).toHaveLength(1);
    expect(report.totalParams).toBe(
      [...expected.values()].reduce((a, d) => a + d.reduce((x, y) => x * y, 1), 0),
    );
  });

  it("folds neutral batch-norm to the identity (eps=0 exact)", () => {
    const fx = makeFixture({
      bnStats: {
        gamma: Array(8).fill(1), beta: Array(8).fill(0),
        mean: Array(8).fill(0), var: Array(8).fill(1),
      },
      foldEps: 0,
    });
    exportCheckpoint({
      ckpt: fx.ckptPath, config: fx.configPath, map: fx.mapPath, out: fx.outPath,
    });
    const store = readVnwt(fx.outPath);
    const original = fx.tensors.get("backbone.stage2.conv.weight")!.data;
    expect([...store.get("enc.c2.weight")!.data]).toEqual([...original]);
    expect([...store.get("enc.c2.bias")!.data]).toEqual(Array(8).fill(0));
  });

  it("folds neutral batch-norm within 1e-6 under the default eps", () => {
    const fx = makeFixture({
      bnStats: {
        gamma: Array(8).fill(1), beta: Array(8).fill(0),
        mean: Array(8).fill(0), var: Array(8).fill(1),
      },
    });
    exportCheckpoint({
      ckpt: fx.ckptPath, config: fx.configPath, map: fx.mapPath, out: fx.outPath,
    });
    const store = readVnwt(fx.outPath);
    const original = fx.tensors.get("backbone.stage2.conv.weight")!.data;
    const folded = store.get("enc.c2.weight")!.data;
    for (let i = 0; i < original.length; i++) {
      expect(Math.abs(folded[i] - original[i])).toBeLessThanOrEqual(1e-6);
    }
  });

  it("applies the fold formula; exported CRCs match recomputed values", () => {
    const fx = makeFixture({ metadata: { bn_eps: "0.001" } });
    exportCheckpoint({
      ckpt: fx.ckptPath, config: fx.configPath, map: fx.mapPath, out: fx.outPath,
    });
    const store = readVnwt(fx.outPath);
    const w = fx.tensors.get("backbone.stage2.conv.weight")!.data;
    const gamma = fx.tensors.get("backbone.stage2.bn.weight")!.data;
    const beta = fx.tensors.get("backbone.stage2.bn.bias")!.data;
    const mean = fx.tensors.get("backbone.stage2.bn.running_mean")!.data;
    const variance = fx.tensors.get("backbone.stage2.bn.running_var")!.data;
    const eps = 0.001; // from checkpoint metadata
    const perOut = w.length / 8;
    const expectedW = new Float32Array(w.length);
    const expectedB = new Float32Array(8);
    for (let o = 0; o < 8; o++) {
      const scale = gamma[o] / Math.sqrt(variance[o] + eps);
      for (let i = 0; i < perOut; i++) {
        expectedW[o * perOut + i] = Math.fround(w[o * perOut + i] * scale);
      }
      expectedB[o] = Math.fround((0 - mean[o]) * scale + beta[o]); // no source bias
    }
    expect([...store.get("enc.c2.weight")!.data]).toEqual([...expectedW]);
    expect([...store.get("enc.c2.bias")!.data]).toEqual([...expectedB]);
    const bytes = (arr: Float32Array) =>
      new Uint8Array(arr.buffer, arr.byteOffset, arr.length * 4);
    expect(crc32(bytes(store.get("enc.c2.weight")!.data))).toBe(crc32(bytes(expectedW)));
  });

  it("re-export is byte-identical", () => {
    const fx = makeFixture();
    exportCheckpoint({
      ckpt: fx.ckptPath, config: fx.configPath, map: fx.mapPath, out: fx.outPath,
    });
    const first = readFileSync(fx.outPath);
    const out2 = join(fx.dir, "again.vnwt");
    exportCheckpoint({
      ckpt: fx.ckptPath, config: fx.configPath, map: fx.mapPath, out: out2,
    });
    expect(readFileSync(out2).equals(first)).toBe(true);
  });

  it("fails hard on unmatched graph entries, listing them", () => {
    const fx = makeFixture();
    const map = JSON.parse(readFileSync(fx.mapPath, "utf-8"));
    map.weights = map.weights.filter((p: [string, string]) => p[1] !== "enc.c1.weight");
    writeFileSync(fx.mapPath, JSON.stringify(map));
    expect(() =>
      exportCheckpoint({
        ckpt: fx.ckptPath, config: fx.configPath, map: fx.mapPath, out: fx.outPath,
      }),
    ).toThrow(/unmatched graph entries: enc\.c1\.weight/);
  });

  it("fails on dim mismatch, naming both sides", () => {
    const fx = makeFixture();
    const map = JSON.parse(readFileSync(fx.mapPath, "utf-8"));
    map.weights = map.weights.map((p: [string, string]) =>
      p[1] === "enc.c1.weight" ? ["backbone.stage2.conv.weight", "enc.c1.weight"] : p,
    );
    // stage2 now feeds both c1 (wrong dims) and c2
    writeFileSync(fx.mapPath, JSON.stringify(map));
    expect(() =>
      exportCheckpoint({
        ckpt: fx.ckptPath, config: fx.configPath, map: fx.mapPath, out: fx.outPath,
      }),
    ).toThrow(/backbone\.stage2\.conv\.weight.*enc\.c1\.weight/s);
  });

  it("fails when a pattern targets an entry the graph does not declare", () => {
    const fx = makeFixture();
    const map = JSON.parse(readFileSync(fx.mapPath, "utf-8"));
    map.weights.push(["classifier.fc.weight", "ghost.weight"]);
    writeFileSync(fx.mapPath, JSON.stringify(map));
    expect(() =>
      exportCheckpoint({
        ckpt: fx.ckptPath, config: fx.configPath, map: fx.mapPath, out: fx.outPath,
      }),
    ).toThrow(/unknown entry 'ghost.weight'/);
  });

  it("fails when two checkpoint keys hit the same entry", () => {
    const fx = makeFixture();
    const map = JSON.parse(readFileSync(fx.mapPath, "utf-8"));
    map.weights.push(["backbone.stage1.conv.weight", "enc.c1.weight"]);
    writeFileSync(fx.mapPath, JSON.stringify(map));
    expect(() =>
      exportCheckpoint({
        ckpt: fx.ckptPath, config: fx.configPath, map: fx.mapPath, out: fx.outPath,
      }),
    ).toThrow(ExportError);
  });
});
