#!/usr/bin/env node
/** embed --data <jsonl> --images <dir> --out <dir> [--batch N] */

import { existsSync } from "node:fs";
import { runEmbedJob } from "./embed.js";

function usage(message?: string): never {
  if (message) console.error(`error: ${message}`);
  console.error("usage: embed --data <jsonl> --images <dir> --out <dir> [--batch N]");
  process.exit(1);
}

export function main(argv: string[]): number {
  const args = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    const flag = argv[i];
    if (!flag.startsWith("--")) usage(`unexpected argument ${flag}`);
    const value = argv[i + 1];
    if (value === undefined) usage(`flag ${flag} needs a value`);
    args.set(flag.slice(2), value);
  }
  for (const key of args.keys()) {
    if (!["data", "images", "out", "batch"].includes(key)) usage(`unknown flag --${key}`);
  }
  const data = args.get("data") ?? usage("--data is required");
  const images = args.get("images") ?? usage("--images is required");
  const out = args.get("out") ?? usage("--out is required");
  const batch = args.has("batch") ? Number(args.get("batch")) : 32;
  if (!Number.isInteger(batch) || batch < 1) usage(`--batch must be a positive integer`);

  if (!existsSync(data)) {
    console.error(`error: dataset ${data} does not exist`);
    return 2;
  }

  const result = runEmbedJob({ dataPath: data, imageDir: images, outDir: out, batchSize: batch });
  console.log(`embedded ${result.records} records into ${result.packs.length} packs + languages.json at ${out}`);
  return 0;
}

const entry = process.argv[1] ?? "";
if (entry.endsWith("cli.js") || entry.endsWith("cli.ts")) {
  process.exit(main(process.argv.slice(2)));
}
