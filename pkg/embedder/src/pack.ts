/**
 * Feature-pack writer.
 *
 * A pack is a `<base>.idx.json` / `<base>.f32` pair: the index holds the
 * ordered sample ids, kind, dim, format version, and a CRC-32 of the raw
 * file; the raw file is the row-major little-endian float32 matrix. The
 * format must match the forecasting engine's reader bit for bit.
 */

import { mkdirSync, renameSync, writeFileSync } from "node:fs";
import { dirname } from "node:path";
import { crc32 } from "node:zlib";

export const FORMAT_VERSION = 1;

export interface FeaturePack {
  kind: string; // "visual" or "text:<field>"
  dim: number;
  ids: string[];
  data: Float32Array; // row-major, ids.length x dim
}

export function makePack(kind: string, dim: number, ids: string[], rows: Float32Array[]): FeaturePack {
  if (rows.length !== ids.length) {
    throw new Error(`pack '${kind}': ${ids.length} ids but ${rows.length} rows`);
  }
  if (new Set(ids).size !== ids.length) {
    throw new Error(`pack '${kind}' has duplicate sample ids`);
  }
  const data = new Float32Array(ids.length * dim);
  rows.forEach((row, r) => {
    if (row.length !== dim) {
      throw new Error(`pack '${kind}' row ${r} has length ${row.length}, expected ${dim}`);
    }
    data.set(row, r * dim);
  });
  return { kind, dim, ids, data };
}

function atomicWrite(path: string, payload: Buffer | string): void {
  const tmp = `${path}.tmp`;
  writeFileSync(tmp, payload);
  renameSync(tmp, path);
}

export function writePack(pack: FeaturePack, basepath: string): void {
  mkdirSync(dirname(basepath), { recursive: true });
  // Float32Array is little-endian on every platform Node supports
  const raw = Buffer.from(pack.data.buffer, pack.data.byteOffset, pack.data.byteLength);
  atomicWrite(`${basepath}.f32`, raw);
  const index = {
    format_version: FORMAT_VERSION,
    kind: pack.kind,
    dim: pack.dim,
    count: pack.ids.length,
    crc32: crc32(raw) >>> 0,
    ids: pack.ids,
  };
  atomicWrite(`${basepath}.idx.json`, JSON.stringify(index));
}
