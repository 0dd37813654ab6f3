/** Minimal JSONL record reader for the fields the exporter consumes. */

import { readFileSync } from "node:fs";

export interface PostRecord {
  id: string;
  title: string;
  category: string;
  tags: string[];
  description: string;
  userId: string;
}

function asString(value: unknown): string {
  return typeof value === "string" ? value : "";
}

function asStringArray(value: unknown): string[] {
  if (!Array.isArray(value)) return [];
  return value.filter((v): v is string => typeof v === "string");
}

/**
 * Parse a JSONL dataset. Lines that are not JSON objects with a string id
 * are skipped with a warning; all text fields default to the empty string.
 * Validation beyond that is the consumer's job, not the exporter's.
 */
export function readRecords(path: string): PostRecord[] {
  const records: PostRecord[] = [];
  const seen = new Set<string>();
  const lines = readFileSync(path, "utf-8").split("\n");
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i].trim();
    if (!line) continue;
    let raw: unknown;
    try {
      raw = JSON.parse(line);
    } catch {
      console.warn(`skipping line ${i + 1}: not valid JSON`);
      continue;
    }
    if (typeof raw !== "object" || raw === null || Array.isArray(raw)) {
      console.warn(`skipping line ${i + 1}: not a JSON object`);
      continue;
    }
    const obj = raw as Record<string, unknown>;
    if (typeof obj.id !== "string" || obj.id === "") {
      console.warn(`skipping line ${i + 1}: missing sample id`);
      continue;
    }
    if (seen.has(obj.id)) {
      console.warn(`skipping line ${i + 1}: duplicate sample id ${obj.id}`);
      continue;
    }
    seen.add(obj.id);
    records.push({
      id: obj.id,
      title: asString(obj.title),
      category: asString(obj.category),
      tags: asStringArray(obj.tags),
      description: asString(obj.description),
      userId: asString(obj.user_id),
    });
  }
  return records;
}
