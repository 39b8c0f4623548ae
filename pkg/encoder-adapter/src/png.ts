/**
 * Minimal PNG decoder for encoder payloads.
 *
 * Supports 8-bit depth, color types 0 (gray), 2 (RGB) and 6 (RGBA),
 * non-interlaced, with all five scanline filters. Output is always RGB.
 */

import { inflateSync } from 'node:zlib';

export interface DecodedImage {
  width: number;
  height: number;
  /** Row-major RGB, 3 bytes per pixel. */
  pixels: Uint8Array;
}

const SIGNATURE = Buffer.from([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]);

const CHANNELS: Record<number, number> = { 0: 1, 2: 3, 6: 4 };

function paeth(a: number, b: number, c: number): number {
  const p = a + b - c;
  const pa = Math.abs(p - a);
  const pb = Math.abs(p - b);
  const pc = Math.abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

export function decodePng(data: Buffer): DecodedImage {
  if (data.length < 8 || !data.subarray(0, 8).equals(SIGNATURE)) {
    throw new Error('not a PNG (bad signature)');
  }
  let width = 0;
  let height = 0;
  let colorType = -1;
  const idat: Buffer[] = [];

  let off = 8;
  while (off + 8 <= data.length) {
    const len = data.readUInt32BE(off);
    const type = data.toString('ascii', off + 4, off + 8);
    const body = data.subarray(off + 8, off + 8 + len);
    if (type === 'IHDR') {
      width = body.readUInt32BE(0);
      height = body.readUInt32BE(4);
      const bitDepth = body[8];
      colorType = body[9];
      const interlace = body[12];
      if (bitDepth !== 8) throw new Error(`unsupported bit depth ${bitDepth}`);
      if (!(colorType in CHANNELS)) throw new Error(`unsupported color type ${colorType}`);
      if (interlace !== 0) throw new Error('interlaced PNGs are not supported');
    } else if (type === 'IDAT') {
      idat.push(body);
    } else if (type === 'IEND') {
      break;
    }
    off += 12 + len;
  }
  if (width === 0 || height === 0 || colorType < 0) {
    throw new Error('missing or empty IHDR');
  }

  const channels = CHANNELS[colorType];
  const stride = width * channels;
  const raw = inflateSync(Buffer.concat(idat));
  if (raw.length < (stride + 1) * height) {
    throw new Error('truncated PNG pixel data');
  }

  const prev = new Uint8Array(stride);
  const cur = new Uint8Array(stride);
  const pixels = new Uint8Array(width * height * 3);
  for (let y = 0; y < height; y++) {
    const rowOff = y * (stride + 1);
    const filter = raw[rowOff];
    for (let x = 0; x < stride; x++) {
      const v = raw[rowOff + 1 + x];
      const left = x >= channels ? cur[x - channels] : 0;
      const up = prev[x];
      const upLeft = x >= channels ? prev[x - channels] : 0;
      switch (filter) {
        case 0: cur[x] = v; break;
        case 1: cur[x] = (v + left) & 0xff; break;
        case 2: cur[x] = (v + up) & 0xff; break;
        case 3: cur[x] = (v + ((left + up) >> 1)) & 0xff; break;
        case 4: cur[x] = (v + paeth(left, up, upLeft)) & 0xff; break;
        default: throw new Error(`unknown scanline filter ${filter} in row ${y}`);
      }
    }
    for (let x = 0; x < width; x++) {
      const src = x * channels;
      const dst = (y * width + x) * 3;
      if (channels === 1) {
        pixels[dst] = pixels[dst + 1] = pixels[dst + 2] = cur[src];
      } else {
        pixels[dst] = cur[src];
        pixels[dst + 1] = cur[src + 1];
        pixels[dst + 2] = cur[src + 2];
      }
    }
    prev.set(cur);
  }
  return { width, height, pixels };
}
