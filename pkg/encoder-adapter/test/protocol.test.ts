import { readFileSync } from 'node:fs';
import { dirname, join } from 'node:path';
import { fileURLToPath } from 'node:url';

import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import { startAdapter, cosine, norm, type AdapterClient } from './helpers.js';

const here = dirname(fileURLToPath(import.meta.url));
const fixtures = JSON.parse(readFileSync(join(here, 'png_fixtures.json'), 'utf8'));

describe('stdio protocol', () => {
  let client: AdapterClient;

  beforeAll(async () => {
    client = await startAdapter();
  });

  afterAll(async () => {
    await client.close();
  });

  it('hands over its dimension first', () => {
    expect(client.dim).toBe(64);
  });

  it('answers text requests with unit embeddings', async () => {
    client.send({ id: 1, kind: 'text', dim: 64, payload: 'a photo of a banana' });
    const [resp] = await client.collect(1);
    expect(resp.id).toBe(1);
    expect(resp.embedding).toHaveLength(64);
    expect(norm(resp.embedding)).toBeCloseTo(1.0, 6);
  });

  it('answers image requests', async () => {
    client.send({ id: 2, kind: 'image', dim: 64, payload: fixtures.pngs.solid_yellow });
    const [resp] = await client.collect(1);
    expect(resp.id).toBe(2);
    expect(norm(resp.embedding)).toBeCloseTo(1.0, 6);
  });

  it('is deterministic for identical inputs', async () => {
    client.send({ id: 3, kind: 'image', payload: fixtures.pngs.solid_red });
    client.send({ id: 4, kind: 'image', payload: fixtures.pngs.solid_red });
    const resp = await client.collect(2);
    const byId = new Map(resp.map((r: any) => [r.id, r.embedding]));
    expect(byId.get(3)).toEqual(byId.get(4));
  });

  it('places related text and images nearby in the shared space', async () => {
    client.send({ id: 5, kind: 'text', payload: 'banana' });
    client.send({ id: 6, kind: 'image', payload: fixtures.pngs.solid_yellow });
    client.send({ id: 7, kind: 'image', payload: fixtures.pngs.solid_red });
    const resp = await client.collect(3);
    const byId = new Map(resp.map((r: any) => [r.id, r.embedding]));
    const textToYellow = cosine(byId.get(5), byId.get(6));
    const textToRed = cosine(byId.get(5), byId.get(7));
    expect(textToYellow).toBeGreaterThan(textToRed);
  });

  it('reports unknown kinds as errors with the request id', async () => {
    client.send({ id: 8, kind: 'audio', payload: 'x' });
    const [resp] = await client.collect(1);
    expect(resp.id).toBe(8);
    expect(resp.error).toMatch(/kind/);
    expect(resp.embedding).toBeUndefined();
  });

  it('reports undecodable image payloads and stays alive', async () => {
    client.send({ id: 9, kind: 'image', payload: Buffer.from('nope').toString('base64') });
    const [bad] = await client.collect(1);
    expect(bad.id).toBe(9);
    expect(bad.error).toBeTruthy();
    client.send({ id: 10, kind: 'text', payload: 'still alive' });
    const [ok] = await client.collect(1);
    expect(ok.id).toBe(10);
    expect(ok.embedding).toBeTruthy();
  });

  it('reports dimension mismatches', async () => {
    client.send({ id: 11, kind: 'text', dim: 128, payload: 'x' });
    const [resp] = await client.collect(1);
    expect(resp.error).toMatch(/dim/);
  });

  it('answers unparseable lines with a null-id error', async () => {
    client.proc.stdin.write('this is not json\n');
    const [resp] = await client.collect(1);
    expect(resp.id).toBeNull();
    expect(resp.error).toBeTruthy();
  });
});

describe('arguments', () => {
  it('serves a custom dimension', async () => {
    const client = await startAdapter(['--dim', '16']);
    expect(client.dim).toBe(16);
    client.send({ id: 0, kind: 'text', payload: 'x' });
    const [resp] = await client.collect(1);
    expect(resp.embedding).toHaveLength(16);
    await client.close();
  });
});
