/**
 * Name maps pair source checkpoint keys with container entry names and
 * declare which batch-norm key groups fold into which conv layers.
 *
 * A weight pattern may hold one '*' wildcard; the matched span is
 * substituted into a '*' in the target. Patterns are applied in file
 * order; each container entry must end up assigned exactly once.
 */

import { readFileSync } from "node:fs";

export interface FoldDirective {
  conv: string;
  gamma: string;
  beta: string;
  mean: string;
  var: string;
  eps?: number;
}

export interface NameMap {
  weights: [string, string][];
  folds: FoldDirective[];
}

export function loadNameMap(path: string): NameMap {
  const obj = JSON.parse(readFileSync(path, "utf-8"));
  const weights = (obj.weights ?? []) as [string, string][];
  const folds = (obj.folds ?? []) as FoldDirective[];
  for (const pair of weights) {
    if (!Array.isArray(pair) || pair.length !== 2) {
      throw new Error(`${path}: weights entries must be [pattern, target] pairs`);
    }
  }
  for (const fold of folds) {
    for (const field of ["conv", "gamma", "beta", "mean", "var"] as const) {
      if (typeof fold[field] !== "string") {
        throw new Error(`${path}: fold directive missing '${field}'`);
      }
    }
  }
  return { weights, folds };
}

/** Returns the wildcard capture ("" for exact matches), or null. */
export function matchPattern(pattern: string, key: string): string | null {
  const star = pattern.indexOf("*");
  if (star < 0) {
    return pattern === key ? "" : null;
  }
  const prefix = pattern.slice(0, star);
  const suffix = pattern.slice(star + 1);
  if (
    key.length >= prefix.length + suffix.length &&
    key.startsWith(prefix) &&
    key.endsWith(suffix)
  ) {
    return key.slice(prefix.length, key.length - suffix.length);
  }
  return null;
}

export function substitute(target: string, capture: string): string {
  return target.includes("*") ? target.replace("*", capture) : target;
}
