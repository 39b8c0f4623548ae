/**
 * Offline deterministic embedding model over a shared color space.
 *
 * Images embed via their dominant non-background color; texts embed via a
 * word -> canonical color lexicon. Both land in the same space: smooth
 * hue/saturation/value features pushed through a fixed random projection.
 * Queries for "banana" therefore score yellow regions highest, without any
 * downloaded weights. Unknown words get a hashed unit vector that is
 * unrelated to the color subspace.
 *
 * This is a stand-in with honest limitations (color is the only semantics
 * it knows); swap in the clip backend for real open-vocabulary behavior.
 */

import { createHash } from 'node:crypto';

import { l2normalize, type EmbeddingModel } from './model.js';
import type { DecodedImage } from './png.js';

const BACKGROUND = { r: 128, g: 128, b: 128, tolerance: 8 };
const HUE_HARMONICS = 4;
const FEATURE_LEN = 2 * HUE_HARMONICS + 3;

/** word -> representative RGB; nouns carry their stereotypical color */
const LEXICON: Record<string, [number, number, number]> = {
  red: [220, 40, 40],
  green: [45, 170, 65],
  blue: [40, 70, 215],
  yellow: [245, 220, 40],
  orange: [255, 150, 35],
  purple: [160, 55, 180],
  violet: [150, 60, 200],
  brown: [145, 90, 45],
  pink: [240, 130, 180],
  cyan: [60, 210, 220],
  magenta: [220, 60, 200],
  white: [245, 245, 245],
  black: [15, 15, 15],
  gray: [128, 128, 128],
  grey: [128, 128, 128],
  banana: [235, 215, 45],
  lemon: [240, 230, 60],
  corn: [245, 215, 70],
  apple: [200, 35, 35],
  tomato: [210, 45, 35],
  strawberry: [215, 40, 55],
  cereal: [150, 95, 45],
  wood: [140, 90, 45],
  wooden: [140, 90, 45],
  chocolate: [120, 70, 35],
  coffee: [110, 70, 40],
  mug: [45, 70, 200],
  water: [50, 110, 220],
  sky: [110, 170, 235],
  crate: [55, 155, 70],
  grass: [60, 170, 60],
  leaf: [55, 160, 55],
  ball: [160, 50, 170],
  grape: [130, 60, 160],
  eggplant: [110, 50, 130],
};

/** Small deterministic PRNG for the fixed projection matrix. */
function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function rgbToHsv(r: number, g: number, b: number): [number, number, number] {
  const rn = r / 255;
  const gn = g / 255;
  const bn = b / 255;
  const max = Math.max(rn, gn, bn);
  const min = Math.min(rn, gn, bn);
  const d = max - min;
  let h = 0;
  if (d > 0) {
    if (max === rn) h = ((gn - bn) / d + 6) % 6;
    else if (max === gn) h = (bn - rn) / d + 2;
    else h = (rn - gn) / d + 4;
    h /= 6;
  }
  return [h, max === 0 ? 0 : d / max, max];
}

export class ChromaLexiconModel implements EmbeddingModel {
  readonly name = 'chroma';
  readonly dim: number;
  private readonly projection: number[][];

  constructor(dim = 64) {
    if (dim < 2) throw new Error('dim must be >= 2');
    this.dim = dim;
    const rand = mulberry32(0xc0105eed);
    this.projection = Array.from({ length: dim }, () =>
      Array.from({ length: FEATURE_LEN }, () => rand() * 2 - 1),
    );
  }

  private colorEmbedding(r: number, g: number, b: number): number[] {
    const [h, s, v] = rgbToHsv(r, g, b);
    const feats: number[] = [];
    for (let k = 1; k <= HUE_HARMONICS; k++) {
      feats.push(Math.sin(2 * Math.PI * k * h) * s);
      feats.push(Math.cos(2 * Math.PI * k * h) * s);
    }
    feats.push(s, v, 1);
    return l2normalize(this.projection.map((row) => row.reduce((acc, w, i) => acc + w * feats[i], 0)));
  }

  private hashedEmbedding(payload: string): number[] {
    const digest = createHash('sha256').update(payload, 'utf8').digest();
    const out: number[] = [];
    for (let i = 0; i < this.dim; i++) {
      out.push(digest[i % digest.length] / 255 - 0.5 + (i >= digest.length ? 1e-3 * i : 0));
    }
    return l2normalize(out);
  }

  async embedText(text: string): Promise<number[]> {
    const words = text.toLowerCase().split(/[^a-z]+/).filter(Boolean);
    for (const word of words) {
      const rgb = LEXICON[word];
      if (rgb) return this.colorEmbedding(...rgb);
    }
    return this.hashedEmbedding('text:' + text);
  }

  async embedImage(image: DecodedImage): Promise<number[]> {
    const counts = new Map<number, number>();
    const { pixels } = image;
    for (let i = 0; i < pixels.length; i += 3) {
      const r = pixels[i];
      const g = pixels[i + 1];
      const b = pixels[i + 2];
      const isBackground =
        Math.abs(r - BACKGROUND.r) <= BACKGROUND.tolerance &&
        Math.abs(g - BACKGROUND.g) <= BACKGROUND.tolerance &&
        Math.abs(b - BACKGROUND.b) <= BACKGROUND.tolerance;
      if (isBackground) continue;
      const key = (r << 16) | (g << 8) | b;
      counts.set(key, (counts.get(key) ?? 0) + 1);
    }
    let bestKey = -1;
    let bestCount = 0;
    for (const [key, count] of counts) {
      if (count > bestCount || (count === bestCount && key < bestKey)) {
        bestKey = key;
        bestCount = count;
      }
    }
    if (bestKey < 0) {
      return this.colorEmbedding(BACKGROUND.r, BACKGROUND.g, BACKGROUND.b);
    }
    return this.colorEmbedding((bestKey >> 16) & 0xff, (bestKey >> 8) & 0xff, bestKey & 0xff);
  }
}
