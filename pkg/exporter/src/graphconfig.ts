/** Reading the engine's graph-config JSON and deriving the weight
 * entries (name and dims) a container must provide to bind. */

import { readFileSync } from "node:fs";

export interface GraphLayer {
  name: string;
  kind: string;
  inputs: string[];
  params: Record<string, unknown>;
  scope?: string;
  bn?: string;
}

export interface GraphConfig {
  name: string;
  input_shape: number[];
  layers: GraphLayer[];
  taps: Record<string, string>;
  meta: Record<string, unknown>;
}

export function loadGraphConfig(path: string): GraphConfig {
  const obj = JSON.parse(readFileSync(path, "utf-8"));
  if (!Array.isArray(obj.layers) || !Array.isArray(obj.input_shape)) {
    throw new Error(`${path}: not a graph config`);
  }
  return obj as GraphConfig;
}

const LEARNABLE = new Set(["conv3d", "pointwise"]);

/** Entry name -> dims, in graph layer order (the container write order). */
export function expectedEntries(config: GraphConfig): Map<string, number[]> {
  const out = new Map<string, number[]>();
  for (const layer of config.layers) {
    if (!LEARNABLE.has(layer.kind)) continue;
    const p = layer.params;
    const inCh = Number(p["in_ch"]);
    const outCh = Number(p["out_ch"]);
    const groups = layer.kind === "pointwise" ? 1 : Number(p["groups"] ?? 1);
    const kernel =
      layer.kind === "pointwise" ? [1, 1, 1] : (p["kernel"] as number[]);
    if (!Number.isInteger(inCh) || !Number.isInteger(outCh) || inCh % groups) {
      throw new Error(`layer '${layer.name}': malformed conv params`);
    }
    out.set(`${layer.name}.weight`, [outCh, inCh / groups, ...kernel.map(Number)]);
    if ((p["bias"] ?? true) !== false) {
      out.set(`${layer.name}.bias`, [outCh]);
    }
  }
  return out;
}
