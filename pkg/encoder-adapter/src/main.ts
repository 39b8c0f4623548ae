/**
 * Entry point: `node dist/main.js [--model chroma|clip[:name]] [--dim N]`.
 *
 * Speaks the conceptcloud external-encoder protocol on stdin/stdout.
 * Diagnostics go to stderr so they never corrupt the protocol stream.
 */

import { createModel } from './model.js';
import { serve } from './protocol.js';

function parseArgs(argv: string[]): { model: string; dim: number } {
  let model = 'chroma';
  let dim = 64;
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (arg === '--model' && i + 1 < argv.length) {
      model = argv[++i];
    } else if (arg === '--dim' && i + 1 < argv.length) {
      dim = Number(argv[++i]);
      if (!Number.isInteger(dim) || dim < 2) {
        throw new Error(`--dim must be an integer >= 2, got ${argv[i]}`);
      }
    } else {
      throw new Error(`unknown argument ${arg}`);
    }
  }
  return { model, dim };
}

async function main(): Promise<number> {
  let opts;
  try {
    opts = parseArgs(process.argv.slice(2));
  } catch (err) {
    console.error(String(err));
    return 2;
  }
  try {
    const model = await createModel(opts.model, opts.dim);
    console.error(`encoder-adapter: serving ${model.name} (dim ${model.dim})`);
    await serve(model);
    return 0;
  } catch (err) {
    console.error(`encoder-adapter: ${err instanceof Error ? err.message : err}`);
    return 1;
  }
}

main().then((code) => process.exit(code));
