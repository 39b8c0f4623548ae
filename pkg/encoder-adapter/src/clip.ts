/**
 * CLIP-class backend via transformers.js (optional).
 *
 * Requires the optional dependency `@xenova/transformers` plus locally
 * available weights (set TRANSFORMERS_CACHE or pass a local directory as
 * the model name); nothing is downloaded here. Image and text embeddings
 * share the model's projection space and are normalized downstream.
 */

import { l2normalize, type EmbeddingModel } from './model.js';
import type { DecodedImage } from './png.js';

export async function createClipModel(modelName: string): Promise<EmbeddingModel> {
  let transformers: any;
  try {
    // non-literal specifier: the dependency is optional and may be absent
    const spec = '@xenova' + '/transformers';
    transformers = await import(spec);
  } catch {
    throw new Error(
      'the clip backend needs the optional dependency @xenova/transformers ' +
      '(npm install @xenova/transformers) and locally cached weights',
    );
  }
  const { AutoTokenizer, AutoProcessor, CLIPTextModelWithProjection,
          CLIPVisionModelWithProjection, RawImage } = transformers;

  const tokenizer = await AutoTokenizer.from_pretrained(modelName);
  const processor = await AutoProcessor.from_pretrained(modelName);
  const textModel = await CLIPTextModelWithProjection.from_pretrained(modelName, { quantized: true });
  const visionModel = await CLIPVisionModelWithProjection.from_pretrained(modelName, { quantized: true });

  const probe = await textModel(await tokenizer('probe', { padding: true, truncation: true }));
  const dim = probe.text_embeds.dims.at(-1) as number;

  return {
    dim,
    name: `clip:${modelName}`,
    async embedText(text: string): Promise<number[]> {
      const inputs = await tokenizer(text, { padding: true, truncation: true });
      const { text_embeds } = await textModel(inputs);
      return l2normalize(Array.from(text_embeds.data as Float32Array));
    },
    async embedImage(image: DecodedImage): Promise<number[]> {
      const rgba = new Uint8ClampedArray(image.width * image.height * 4);
      for (let i = 0, j = 0; i < image.pixels.length; i += 3, j += 4) {
        rgba[j] = image.pixels[i];
        rgba[j + 1] = image.pixels[i + 1];
        rgba[j + 2] = image.pixels[i + 2];
        rgba[j + 3] = 255;
      }
      const raw = new RawImage(rgba, image.width, image.height, 4);
      const inputs = await processor(raw.rgb());
      const { image_embeds } = await visionModel(inputs);
      return l2normalize(Array.from(image_embeds.data as Float32Array));
    },
  };
}
