import { writeFileSync } from "node:fs";
import { mkdtemp, rm } from "node:fs/promises";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, afterEach, beforeAll, describe, expect, it, vi } from "vitest";
import { readRecords } from "../src/records.js";

let dir: string;

beforeAll(async () => {
  dir = await mkdtemp(join(tmpdir(), "rec-"));
});

afterAll(async () => {
  await rm(dir, { recursive: true, force: true });
});

afterEach(() => {
  vi.restoreAllMocks();
});

function writeJsonl(name: string, lines: string[]): string {
  const path = join(dir, name);
  writeFileSync(path, lines.join("\n") + "\n");
  return path;
}

describe("readRecords", () => {
  it("parses well-formed records in order", () => {
    const path = writeJsonl("ok.jsonl", [
      JSON.stringify({ id: "v1", title: "first", category: "music", tags: ["a", "b"], description: "d", user_id: "u1" }),
      JSON.stringify({ id: "v2", title: "second", category: "games", tags: [], description: "", user_id: "u2" }),
    ]);
    const records = readRecords(path);
    expect(records.map((r) => r.id)).toEqual(["v1", "v2"]);
    expect(records[0]).toEqual({
      id: "v1", title: "first", category: "music", tags: ["a", "b"], description: "d", userId: "u1",
    });
  });

  it("defaults missing or mistyped fields to empty values", () => {
    const path = writeJsonl("defaults.jsonl", [
      JSON.stringify({ id: "v1", title: 42, tags: "not-a-list" }),
    ]);
    expect(readRecords(path)).toEqual([
      { id: "v1", title: "", category: "", tags: [], description: "", userId: "" },
    ]);
  });

  it("keeps only string entries of a tag list", () => {
    const path = writeJsonl("tags.jsonl", [JSON.stringify({ id: "v1", tags: ["ok", 3, null, "fine"] })]);
    expect(readRecords(path)[0].tags).toEqual(["ok", "fine"]);
  });

  it("skips unparseable and idless lines with warnings", () => {
    const warn = vi.spyOn(console, "warn").mockImplementation(() => {});
    const path = writeJsonl("bad.jsonl", [
      "{ not json",
      JSON.stringify(["an", "array"]),
      JSON.stringify({ title: "no id" }),
      JSON.stringify({ id: "", title: "empty id" }),
      JSON.stringify({ id: "good" }),
    ]);
    const records = readRecords(path);
    expect(records.map((r) => r.id)).toEqual(["good"]);
    expect(warn).toHaveBeenCalledTimes(4);
  });

  it("skips duplicate ids, keeping the first occurrence", () => {
    const warn = vi.spyOn(console, "warn").mockImplementation(() => {});
    const path = writeJsonl("dup.jsonl", [
      JSON.stringify({ id: "v1", title: "keep" }),
      JSON.stringify({ id: "v1", title: "drop" }),
    ]);
    const records = readRecords(path);
    expect(records).toHaveLength(1);
    expect(records[0].title).toBe("keep");
    expect(warn).toHaveBeenCalledOnce();
  });

  it("ignores blank lines", () => {
    const path = writeJsonl("blank.jsonl", ["", JSON.stringify({ id: "v1" }), "   ", ""]);
    expect(readRecords(path)).toHaveLength(1);
  });
});
