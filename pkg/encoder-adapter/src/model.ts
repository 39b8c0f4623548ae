import type { DecodedImage } from './png.js';

export interface EmbeddingModel {
  readonly dim: number;
  readonly name: string;
  embedText(text: string): Promise<number[]>;
  embedImage(image: DecodedImage): Promise<number[]>;
}

export function l2normalize(v: number[]): number[] {
  const norm = Math.sqrt(v.reduce((s, x) => s + x * x, 0));
  if (norm < 1e-12) {
    const out = v.map(() => 0);
    out[0] = 1;
    return out;
  }
  return v.map((x) => x / norm);
}

export async function createModel(spec: string, dim: number): Promise<EmbeddingModel> {
  if (spec === 'chroma') {
    const { ChromaLexiconModel } = await import('./chroma.js');
    return new ChromaLexiconModel(dim);
  }
  if (spec === 'clip' || spec.startsWith('clip:')) {
    const { createClipModel } = await import('./clip.js');
    const name = spec.includes(':') ? spec.slice(5) : 'Xenova/clip-vit-base-patch32';
    return createClipModel(name);
  }
  throw new Error(`unknown model spec ${JSON.stringify(spec)} (expected chroma or clip[:name])`);
}
