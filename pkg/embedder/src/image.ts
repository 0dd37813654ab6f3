/**
 * Deterministic image encoder: 224x224 normalization, patch pooling, and a
 * fixed random projection to a 2048-d feature.
 *
 * Stands in for a pretrained CNN's penultimate layer: same preprocessing
 * (resize, per-channel standardization), same output contract. A missing
 * image is embedded as the all-zero (blank) image; a corrupt file falls back
 * to the same blank embedding with a warning.
 */

import { createHash } from "node:crypto";
import { existsSync, readFileSync } from "node:fs";
import { PNG } from "pngjs";

export const VISUAL_DIM = 2048;
export const IMAGE_SIZE = 224;
const GRID = 16; // pooled patch grid: GRID x GRID x 3 channels
const POOLED = GRID * GRID * 3;

// standard per-channel normalization constants
const MEAN = [0.485, 0.456, 0.406];
const STD = [0.229, 0.224, 0.225];

/** Bilinear resize of an RGB buffer to IMAGE_SIZE square, values in [0, 1]. */
function resize(rgb: Float32Array, width: number, height: number): Float32Array {
  const out = new Float32Array(IMAGE_SIZE * IMAGE_SIZE * 3);
  for (let y = 0; y < IMAGE_SIZE; y++) {
    const sy = ((y + 0.5) * height) / IMAGE_SIZE - 0.5;
    const y0 = Math.max(0, Math.floor(sy));
    const y1 = Math.min(height - 1, y0 + 1);
    const fy = Math.min(1, Math.max(0, sy - y0));
    for (let x = 0; x < IMAGE_SIZE; x++) {
      const sx = ((x + 0.5) * width) / IMAGE_SIZE - 0.5;
      const x0 = Math.max(0, Math.floor(sx));
      const x1 = Math.min(width - 1, x0 + 1);
      const fx = Math.min(1, Math.max(0, sx - x0));
      for (let c = 0; c < 3; c++) {
        const p00 = rgb[(y0 * width + x0) * 3 + c];
        const p01 = rgb[(y0 * width + x1) * 3 + c];
        const p10 = rgb[(y1 * width + x0) * 3 + c];
        const p11 = rgb[(y1 * width + x1) * 3 + c];
        out[(y * IMAGE_SIZE + x) * 3 + c] =
          p00 * (1 - fy) * (1 - fx) + p01 * (1 - fy) * fx + p10 * fy * (1 - fx) + p11 * fy * fx;
      }
    }
  }
  return out;
}

/** Read a PNG into a resized [0,1] RGB buffer, or null if missing/corrupt. */
export function loadImage(path: string): Float32Array | null {
  if (!existsSync(path)) return null;
  let png: PNG;
  try {
    png = PNG.sync.read(readFileSync(path));
  } catch (err) {
    console.warn(`corrupt image ${path}: ${String(err)}; using blank image`);
    return null;
  }
  const rgb = new Float32Array(png.width * png.height * 3);
  for (let i = 0; i < png.width * png.height; i++) {
    rgb[i * 3] = png.data[i * 4] / 255;
    rgb[i * 3 + 1] = png.data[i * 4 + 1] / 255;
    rgb[i * 3 + 2] = png.data[i * 4 + 2] / 255;
  }
  return resize(rgb, png.width, png.height);
}

let projection: Float32Array | null = null;

/** Fixed seeded projection matrix (POOLED x VISUAL_DIM), built once. */
function projectionMatrix(): Float32Array {
  if (projection) return projection;
  projection = new Float32Array(POOLED * VISUAL_DIM);
  const scale = 1 / Math.sqrt(POOLED);
  for (let row = 0; row < POOLED; row++) {
    // one hash per row seeds a simple LCG stream for that row
    const digest = createHash("sha256").update(`visual-projection:${row}`).digest();
    let state = digest.readUInt32LE(0) || 1;
    for (let col = 0; col < VISUAL_DIM; col++) {
      state = (Math.imul(state, 1664525) + 1013904223) >>> 0;
      projection[row * VISUAL_DIM + col] = ((state / 4294967296) * 2 - 1) * scale;
    }
  }
  return projection;
}

/** Normalize, average-pool to a GRID x GRID x 3 map, project, squash. */
export function embedImage(pixels: Float32Array): Float32Array {
  const patch = IMAGE_SIZE / GRID;
  const pooled = new Float32Array(POOLED);
  for (let gy = 0; gy < GRID; gy++) {
    for (let gx = 0; gx < GRID; gx++) {
      for (let c = 0; c < 3; c++) {
        let sum = 0;
        for (let y = gy * patch; y < (gy + 1) * patch; y++) {
          for (let x = gx * patch; x < (gx + 1) * patch; x++) {
            sum += (pixels[(y * IMAGE_SIZE + x) * 3 + c] - MEAN[c]) / STD[c];
          }
        }
        pooled[(gy * GRID + gx) * 3 + c] = sum / (patch * patch);
      }
    }
  }
  const proj = projectionMatrix();
  const out = new Float32Array(VISUAL_DIM);
  for (let row = 0; row < POOLED; row++) {
    const v = pooled[row];
    if (v === 0) continue;
    const base = row * VISUAL_DIM;
    for (let col = 0; col < VISUAL_DIM; col++) out[col] += v * proj[base + col];
  }
  for (let col = 0; col < VISUAL_DIM; col++) out[col] = Math.tanh(out[col]);
  return out;
}

let blank: Float32Array | null = null;

/** Embedding of the all-zero image: the stand-in for missing covers. */
export function blankEmbedding(): Float32Array {
  if (!blank) blank = embedImage(new Float32Array(IMAGE_SIZE * IMAGE_SIZE * 3));
  return blank;
}
