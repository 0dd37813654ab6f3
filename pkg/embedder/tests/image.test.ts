import { writeFileSync } from "node:fs";
import { mkdtemp, rm } from "node:fs/promises";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { PNG } from "pngjs";
import { afterAll, beforeAll, describe, expect, it, vi } from "vitest";
import { blankEmbedding, embedImage, IMAGE_SIZE, loadImage, VISUAL_DIM } from "../src/image.js";

let dir: string;

beforeAll(async () => {
  dir = await mkdtemp(join(tmpdir(), "img-"));
});

afterAll(async () => {
  await rm(dir, { recursive: true, force: true });
});

function writePng(name: string, width: number, height: number, rgb: [number, number, number]): string {
  const png = new PNG({ width, height });
  for (let i = 0; i < width * height; i++) {
    png.data[i * 4] = rgb[0];
    png.data[i * 4 + 1] = rgb[1];
    png.data[i * 4 + 2] = rgb[2];
    png.data[i * 4 + 3] = 255;
  }
  const path = join(dir, name);
  writeFileSync(path, PNG.sync.write(png));
  return path;
}

describe("loadImage", () => {
  it("returns null for a missing file", () => {
    expect(loadImage(join(dir, "nope.png"))).toBeNull();
  });

  it("returns null with a warning for a corrupt file", () => {
    const path = join(dir, "corrupt.png");
    writeFileSync(path, Buffer.from("this is not a png"));
    const warn = vi.spyOn(console, "warn").mockImplementation(() => {});
    try {
      expect(loadImage(path)).toBeNull();
      expect(warn).toHaveBeenCalledOnce();
      expect(String(warn.mock.calls[0][0])).toMatch(/corrupt image/);
    } finally {
      warn.mockRestore();
    }
  });

  it("resizes to the model input square in [0, 1]", () => {
    const pixels = loadImage(writePng("solid.png", 10, 7, [255, 0, 128]));
    expect(pixels).not.toBeNull();
    expect(pixels!.length).toBe(IMAGE_SIZE * IMAGE_SIZE * 3);
    expect(pixels![0]).toBeCloseTo(1.0, 6);
    expect(pixels![1]).toBeCloseTo(0.0, 6);
    expect(pixels![2]).toBeCloseTo(128 / 255, 6);
  });
});

describe("embedImage", () => {
  it("produces a 2048-d feature inside the squashing range", () => {
    const out = embedImage(loadImage(writePng("feat.png", 32, 32, [30, 180, 90]))!);
    expect(out.length).toBe(VISUAL_DIM);
    for (const v of out) {
      expect(v).toBeGreaterThanOrEqual(-1);
      expect(v).toBeLessThanOrEqual(1);
      expect(Number.isFinite(v)).toBe(true);
    }
  });

  it("is resolution-invariant for solid colors", () => {
    // bilinear resize of a constant image is constant, so patch means and
    // the projected feature agree across source resolutions
    const small = embedImage(loadImage(writePng("small.png", 8, 6, [30, 180, 90]))!);
    const large = embedImage(loadImage(writePng("large.png", 100, 50, [30, 180, 90]))!);
    for (let i = 0; i < VISUAL_DIM; i++) {
      expect(Math.abs(small[i] - large[i])).toBeLessThan(1e-6);
    }
  });

  it("distinguishes colors", () => {
    const green = embedImage(loadImage(writePng("green.png", 16, 16, [0, 255, 0]))!);
    const blue = embedImage(loadImage(writePng("blue.png", 16, 16, [0, 0, 255]))!);
    expect(green).not.toEqual(blue);
  });

  it("is deterministic", () => {
    const pixels = loadImage(writePng("det.png", 16, 16, [12, 34, 56]))!;
    expect(embedImage(pixels)).toEqual(embedImage(pixels));
  });
});

describe("blankEmbedding", () => {
  it("equals the embedding of the all-zero image", () => {
    expect(blankEmbedding()).toEqual(embedImage(new Float32Array(IMAGE_SIZE * IMAGE_SIZE * 3)));
  });

  it("is a stable constant", () => {
    expect(blankEmbedding()).toEqual(blankEmbedding());
    expect(blankEmbedding().length).toBe(VISUAL_DIM);
  });

  it("differs from a non-blank embedding", () => {
    const out = embedImage(loadImage(writePng("nonblank.png", 16, 16, [200, 200, 200]))!);
    expect(out).not.toEqual(blankEmbedding());
  });
});
