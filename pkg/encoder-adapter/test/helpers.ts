import { spawn, type ChildProcessWithoutNullStreams } from 'node:child_process';
import { createInterface } from 'node:readline';
import { dirname, join } from 'node:path';
import { fileURLToPath } from 'node:url';

export const ADAPTER_DIR = join(dirname(fileURLToPath(import.meta.url)), '..');
export const MAIN_JS = join(ADAPTER_DIR, 'dist', 'main.js');

export interface AdapterClient {
  proc: ChildProcessWithoutNullStreams;
  dim: number;
  send(msg: unknown): void;
  /** resolves with the next n response lines (any order) */
  collect(n: number, timeoutMs?: number): Promise<any[]>;
  close(): Promise<void>;
}

export async function startAdapter(args: string[] = []): Promise<AdapterClient> {
  const proc = spawn('node', [MAIN_JS, ...args], { stdio: ['pipe', 'pipe', 'inherit'] });
  const lines = createInterface({ input: proc.stdout });
  const queue: any[] = [];
  const waiters: Array<() => void> = [];
  lines.on('line', (line) => {
    if (!line.trim()) return;
    queue.push(JSON.parse(line));
    waiters.splice(0).forEach((w) => w());
  });

  async function next(timeoutMs = 10_000): Promise<any> {
    const deadline = Date.now() + timeoutMs;
    while (queue.length === 0) {
      if (Date.now() > deadline) throw new Error('timed out waiting for adapter output');
      await new Promise<void>((resolve) => {
        const t = setTimeout(resolve, 50);
        waiters.push(() => {
          clearTimeout(t);
          resolve();
        });
      });
    }
    return queue.shift();
  }

  const handshake = await next();
  return {
    proc,
    dim: handshake.dim,
    send: (msg) => proc.stdin.write(JSON.stringify(msg) + '\n'),
    collect: async (n, timeoutMs = 30_000) => {
      const out = [];
      for (let i = 0; i < n; i++) out.push(await next(timeoutMs));
      return out;
    },
    close: () =>
      new Promise<void>((resolve) => {
        proc.on('exit', () => resolve());
        proc.stdin.end();
        setTimeout(() => proc.kill(), 5_000).unref();
      }),
  };
}

export function norm(v: number[]): number {
  return Math.sqrt(v.reduce((s, x) => s + x * x, 0));
}

export function cosine(a: number[], b: number[]): number {
  const dot = a.reduce((s, x, i) => s + x * b[i], 0);
  return dot / (norm(a) * norm(b));
}
