#!/usr/bin/env node
/**
 * vnwt-export --ckpt model.safetensors --config graph.json
 *             --map namemap.json --out model.vnwt [--report report.json]
 *
 * Prints a JSON report of matched/folded/dropped keys to stdout.
 */

import { writeFileSync } from "node:fs";
import { exportCheckpoint, ExportError } from "./export.js";

function parseArgs(argv: string[]): Map<string, string> {
  const args = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    const flag = argv[i];
    const value = argv[i + 1];
    if (!flag.startsWith("--") || value === undefined) {
      throw new ExportError(`malformed arguments near '${flag}'`);
    }
    args.set(flag.slice(2), value);
  }
  for (const required of ["ckpt", "config", "map", "out"]) {
    if (!args.has(required)) {
      throw new ExportError(`missing required flag --${required}`);
    }
  }
  return args;
}

export function main(argv: string[]): number {
  let args: Map<string, string>;
  try {
    args = parseArgs(argv);
  } catch (err) {
    console.error(`usage error: ${(err as Error).message}`);
    console.error(
      "usage: vnwt-export --ckpt <model.safetensors> --config <graph.json> " +
        "--map <namemap.json> --out <model.vnwt> [--report <report.json>]",
    );
    return 2;
  }
  try {
    const report = exportCheckpoint({
      ckpt: args.get("ckpt")!,
      config: args.get("config")!,
      map: args.get("map")!,
      out: args.get("out")!,
    });
    const json = JSON.stringify(report, null, 2);
    console.log(json);
    const reportPath = args.get("report");
    if (reportPath) {
      writeFileSync(reportPath, json + "\n");
    }
    return 0;
  } catch (err) {
    console.error(`export failed: ${(err as Error).message}`);
    return 1;
  }
}

process.exit(main(process.argv.slice(2)));
