import { readFileSync } from 'node:fs';
import { join } from 'node:path';

const FIXTURE_DIR = join(__dirname, 'fixtures');

export function fixture<T = unknown>(name: string): T {
  return JSON.parse(readFileSync(join(FIXTURE_DIR, name), 'utf-8')) as T;
}

export function fixtureText(name: string): string {
  return readFileSync(join(FIXTURE_DIR, name), 'utf-8');
}

export interface Route {
  method: string;
  path: RegExp;
  reply: (url: string, init?: RequestInit) =>
    | { status?: number; json?: unknown; text?: string }
    | Promise<{ status?: number; json?: unknown; text?: string }>;
}

export interface FetchLogEntry {
  method: string;
  url: string;
}

/** Install a routed fetch mock; returns the call log. */
export function mockFetch(routes: Route[]): FetchLogEntry[] {
  const log: FetchLogEntry[] = [];
  globalThis.fetch = (async (input: RequestInfo | URL, init?: RequestInit) => {
    const url = String(input);
    const method = (init?.method ?? 'GET').toUpperCase();
    log.push({ method, url });
    for (const route of routes) {
      if (route.method === method && route.path.test(url)) {
        const result = await route.reply(url, init);
        const status = result.status ?? 200;
        if (result.text !== undefined) {
          return new Response(result.text, { status });
        }
        return new Response(JSON.stringify(result.json ?? {}), {
          status,
          headers: { 'Content-Type': 'application/json' },
        });
      }
    }
    throw new Error(`no mock route for ${method} ${url}`);
  }) as typeof fetch;
  return log;
}

/** Drain pending microtasks/macrotasks so async handlers settle. */
export async function flush(times = 6): Promise<void> {
  for (let i = 0; i < times; i += 1) {
    await new Promise((resolve) => setTimeout(resolve, 0));
  }
}
