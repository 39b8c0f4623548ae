/**
 * Stdio JSON-lines protocol server.
 *
 * Handshake: one line {"dim": N}. Each request
 * {"id", "kind": "image"|"text", "dim"?, "payload"} gets exactly one
 * response {"id", "embedding": [...]} or {"id", "error": "..."}. Requests
 * may be pipelined; responses go out in completion order (ids
 * disambiguate). Malformed input produces an error response and the
 * process stays alive.
 */

import { createInterface } from 'node:readline';

import type { EmbeddingModel } from './model.js';
import { decodePng } from './png.js';

interface Request {
  id?: unknown;
  kind?: unknown;
  dim?: unknown;
  payload?: unknown;
}

function writeLine(out: NodeJS.WritableStream, message: unknown): void {
  out.write(JSON.stringify(message) + '\n');
}

export async function handleRequest(model: EmbeddingModel, req: Request): Promise<object> {
  const id = typeof req.id === 'number' ? req.id : null;
  if (id === null) {
    return { id: null, error: 'request is missing a numeric id' };
  }
  try {
    if (req.dim !== undefined && req.dim !== model.dim) {
      throw new Error(`requested dim ${req.dim} but this encoder serves ${model.dim}`);
    }
    if (typeof req.payload !== 'string') {
      throw new Error('payload must be a string');
    }
    let embedding: number[];
    if (req.kind === 'text') {
      embedding = await model.embedText(req.payload);
    } else if (req.kind === 'image') {
      const bytes = Buffer.from(req.payload, 'base64');
      embedding = await model.embedImage(decodePng(bytes));
    } else {
      throw new Error(`unknown kind ${JSON.stringify(req.kind)}`);
    }
    return { id, embedding };
  } catch (err) {
    return { id, error: err instanceof Error ? err.message : String(err) };
  }
}

export async function serve(
  model: EmbeddingModel,
  input: NodeJS.ReadableStream = process.stdin,
  output: NodeJS.WritableStream = process.stdout,
): Promise<void> {
  writeLine(output, { dim: model.dim });
  const lines = createInterface({ input, crlfDelay: Infinity });
  const inflight: Promise<void>[] = [];
  for await (const line of lines) {
    if (!line.trim()) continue;
    let req: Request;
    try {
      req = JSON.parse(line);
    } catch {
      writeLine(output, { id: null, error: 'unparseable request line' });
      continue;
    }
    inflight.push(handleRequest(model, req).then((resp) => writeLine(output, resp)));
  }
  await Promise.all(inflight);
}
