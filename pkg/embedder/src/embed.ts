/** Export pipeline: records in, six feature packs and languages.json out. */

import { mkdirSync, renameSync, writeFileSync } from "node:fs";
import { join } from "node:path";
import { annotateLanguages } from "./language.js";
import { blankEmbedding, embedImage, loadImage, VISUAL_DIM } from "./image.js";
import { FeaturePack, makePack, writePack } from "./pack.js";
import { PostRecord, readRecords } from "./records.js";
import { embedText, joinTags, TEXT_DIM } from "./text.js";

export const TEXT_FIELDS = ["category", "title", "tags", "description", "user_id"] as const;

export interface EmbedJob {
  dataPath: string;
  imageDir: string;
  outDir: string;
  batchSize: number;
}

function fieldText(record: PostRecord, field: (typeof TEXT_FIELDS)[number]): string {
  switch (field) {
    case "category":
      return record.category;
    case "title":
      return record.title;
    case "tags":
      return joinTags(record.tags);
    case "description":
      return record.description;
    case "user_id":
      return record.userId;
  }
}

function* batches<T>(items: T[], size: number): Generator<T[]> {
  for (let i = 0; i < items.length; i += size) yield items.slice(i, i + size);
}

export function embedTextPacks(records: PostRecord[], batchSize: number): FeaturePack[] {
  const ids = records.map((r) => r.id);
  return TEXT_FIELDS.map((field) => {
    const rows: Float32Array[] = [];
    for (const chunk of batches(records, batchSize)) {
      for (const record of chunk) rows.push(embedText(fieldText(record, field)));
    }
    return makePack(`text:${field}`, TEXT_DIM, ids, rows);
  });
}

export function embedImagePack(records: PostRecord[], imageDir: string, batchSize: number): FeaturePack {
  const rows: Float32Array[] = [];
  for (const chunk of batches(records, batchSize)) {
    for (const record of chunk) {
      const pixels = loadImage(join(imageDir, `${record.id}.png`));
      rows.push(pixels ? embedImage(pixels) : blankEmbedding());
    }
  }
  return makePack("visual", VISUAL_DIM, records.map((r) => r.id), rows);
}

export function runEmbedJob(job: EmbedJob): { records: number; packs: string[] } {
  const records = readRecords(job.dataPath);
  mkdirSync(job.outDir, { recursive: true });

  const packs: FeaturePack[] = [
    embedImagePack(records, job.imageDir, job.batchSize),
    ...embedTextPacks(records, job.batchSize),
  ];
  const written: string[] = [];
  for (const pack of packs) {
    const base = pack.kind === "visual" ? "visual" : `text_${pack.kind.slice("text:".length)}`;
    writePack(pack, join(job.outDir, base));
    written.push(base);
  }

  const languages = annotateLanguages(records);
  const tmp = join(job.outDir, "languages.json.tmp");
  writeFileSync(tmp, JSON.stringify(languages, null, 2) + "\n");
  renameSync(tmp, join(job.outDir, "languages.json"));

  return { records: records.length, packs: written };
}
