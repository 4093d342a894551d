/** Test helpers: recorded-fixture loading and a fixture-backed fetch. */

import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

const FIXTURES = join(dirname(fileURLToPath(import.meta.url)), "fixtures");

export interface RecordedResponse {
  status: number;
  body: {
    request_id: string;
    agent_id: string | null;
    operation: string;
    result?: unknown;
    error?: { code: string; message: string; field: string | null };
  };
}

export function fixture(name: string): RecordedResponse {
  return JSON.parse(
    readFileSync(join(FIXTURES, `${name}.json`), "utf-8"),
  ) as RecordedResponse;
}

export function asResponse(rec: RecordedResponse): Response {
  return new Response(JSON.stringify(rec.body), {
    status: rec.status,
    headers: { "content-type": "application/json" },
  });
}

/** Route table keyed by "METHOD path" (query string included). Each value is
 * either one recorded response or a queue consumed in order. */
export type RouteTable = Map<string, RecordedResponse | RecordedResponse[]>;

export function fixtureFetch(routes: RouteTable, log?: string[]) {
  return async (url: string, init?: RequestInit): Promise<Response> => {
    const method = (init?.method ?? "GET").toUpperCase();
    const path = url.replace(/^https?:\/\/[^/]+/, "");
    const key = `${method} ${path}`;
    log?.push(key);
    const entry = routes.get(key);
    if (entry === undefined) {
      throw new Error(`no fixture for ${key}`);
    }
    if (Array.isArray(entry)) {
      if (entry.length === 0) {
        throw new Error(`fixture queue exhausted for ${key}`);
      }
      return asResponse(entry.length > 1 ? entry.shift()! : entry[0]!);
    }
    return asResponse(entry);
  };
}
