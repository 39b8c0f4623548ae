/** Reader for the primary's concept-cloud PLY files (test-side consumer). */

import { readFileSync } from 'node:fs';

export interface ConceptCloudFile {
  featureDim: number;
  positions: Array<[number, number, number]>;
  sources: number[]; // -1 where has_source = 0
  features: number[][];
}

export function readConceptCloud(path: string): ConceptCloudFile {
  const data = readFileSync(path);
  const headerEnd = data.indexOf('end_header\n');
  if (!data.subarray(0, 3).equals(Buffer.from('ply')) || headerEnd < 0) {
    throw new Error(`${path}: not a PLY file`);
  }
  const header = data.toString('ascii', 0, headerEnd).split('\n');
  let vertexCount = -1;
  let featureDim = -1;
  for (const line of header) {
    const tok = line.trim().split(/\s+/);
    if (tok[0] === 'element' && tok[1] === 'vertex') vertexCount = Number(tok[2]);
    if (tok[0] === 'comment' && tok[1] === 'feature_dim') featureDim = Number(tok[2]);
  }
  if (vertexCount < 0 || featureDim < 0) {
    throw new Error(`${path}: missing vertex element or feature_dim comment`);
  }

  const out: ConceptCloudFile = { featureDim, positions: [], sources: [], features: [] };
  let off = headerEnd + 'end_header\n'.length;
  for (let i = 0; i < vertexCount; i++) {
    const x = data.readDoubleLE(off);
    const y = data.readDoubleLE(off + 8);
    const z = data.readDoubleLE(off + 16);
    const source = data.readUInt32LE(off + 24);
    const hasSource = data.readUInt8(off + 28);
    const count = data.readUInt16LE(off + 29);
    if (count !== featureDim) {
      throw new Error(`${path}: record ${i} has feature length ${count}, expected ${featureDim}`);
    }
    const feat: number[] = [];
    for (let j = 0; j < count; j++) {
      feat.push(data.readFloatLE(off + 31 + 4 * j));
    }
    off += 31 + 4 * count;
    out.positions.push([x, y, z]);
    out.sources.push(hasSource ? source : -1);
    out.features.push(feat);
  }
  return out;
}
