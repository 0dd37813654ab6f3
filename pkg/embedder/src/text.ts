/**
 * Deterministic text encoder: 768-d mean-pooled token embeddings.
 *
 * Token vectors come from a counter-free construction: SHA-256 of the token
 * seeds a small PRNG that fills the vector. No trained weights are involved,
 * so the export is reproducible everywhere; the interface (field in, pooled
 * 768-d row out) is the contract a pretrained sentence encoder would fill.
 */

import { createHash } from "node:crypto";

export const TEXT_DIM = 768;

/** sfc32: tiny counter PRNG, uniform in [0, 1). */
function sfc32(a: number, b: number, c: number, d: number): () => number {
  return () => {
    a >>>= 0; b >>>= 0; c >>>= 0; d >>>= 0;
    const t = (a + b) | 0;
    a = b ^ (b >>> 9);
    b = (c + (c << 3)) | 0;
    c = (c << 21) | (c >>> 11);
    d = (d + 1) | 0;
    const out = (t + d) | 0;
    c = (c + out) | 0;
    return (out >>> 0) / 4294967296;
  };
}

const tokenCache = new Map<string, Float32Array>();

export function tokenVector(token: string): Float32Array {
  const cached = tokenCache.get(token);
  if (cached) return cached;

  const digest = createHash("sha256").update(token, "utf-8").digest();
  const rand = sfc32(
    digest.readUInt32LE(0),
    digest.readUInt32LE(4),
    digest.readUInt32LE(8),
    digest.readUInt32LE(12),
  );
  const vec = new Float32Array(TEXT_DIM);
  let norm = 0;
  for (let i = 0; i < TEXT_DIM; i++) {
    const v = rand() * 2 - 1;
    vec[i] = v;
    norm += v * v;
  }
  norm = Math.sqrt(norm) || 1;
  for (let i = 0; i < TEXT_DIM; i++) vec[i] /= norm;

  tokenCache.set(token, vec);
  return vec;
}

export function tokenize(text: string): string[] {
  return text
    .toLowerCase()
    .split(/[^\p{L}\p{N}]+/u)
    .filter((t) => t.length > 0);
}

/** Mean pooling over token vectors; empty input embeds to the zero vector. */
export function embedText(text: string): Float32Array {
  const out = new Float32Array(TEXT_DIM);
  const tokens = tokenize(text);
  if (tokens.length === 0) return out;
  for (const token of tokens) {
    const vec = tokenVector(token);
    for (let i = 0; i < TEXT_DIM; i++) out[i] += vec[i];
  }
  for (let i = 0; i < TEXT_DIM; i++) out[i] /= tokens.length;
  return out;
}

/** Tag lists are space-joined before encoding. */
export function joinTags(tags: string[]): string {
  return tags.join(" ");
}
