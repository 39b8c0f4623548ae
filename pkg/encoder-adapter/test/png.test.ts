import { readFileSync } from 'node:fs';
import { join, dirname } from 'node:path';
import { fileURLToPath } from 'node:url';

import { describe, expect, it } from 'vitest';

import { decodePng } from '../src/png.js';

const here = dirname(fileURLToPath(import.meta.url));
const fixtures = JSON.parse(readFileSync(join(here, 'png_fixtures.json'), 'utf8'));

function decode(name: string) {
  return decodePng(Buffer.from(fixtures.pngs[name], 'base64'));
}

describe('decodePng', () => {
  it.each([0, 1, 2, 3, 4])('recovers pixels through scanline filter %i', (ft) => {
    const img = decode(`filter${ft}`);
    expect(img.width).toBe(fixtures.width);
    expect(img.height).toBe(fixtures.height);
    expect(Array.from(img.pixels)).toEqual(fixtures.rgb);
  });

  it('decodes the reference encoder output (Pillow)', () => {
    expect(Array.from(decode('pillow').pixels)).toEqual(fixtures.rgb);
  });

  it('drops the alpha channel of RGBA images', () => {
    expect(Array.from(decode('rgba').pixels)).toEqual(fixtures.rgb);
  });

  it('expands grayscale to RGB', () => {
    expect(Array.from(decode('gray').pixels)).toEqual(fixtures.gray_expected);
  });

  it('rejects non-PNG bytes', () => {
    expect(() => decodePng(Buffer.from('JFIF not a png'))).toThrow(/signature/);
  });

  it('rejects truncated pixel data', () => {
    const good = Buffer.from(fixtures.pngs.filter0, 'base64');
    // corrupt the IDAT length so inflate yields too few bytes
    const bad = Buffer.concat([good.subarray(0, 40)]);
    expect(() => decodePng(bad)).toThrow();
  });
});
