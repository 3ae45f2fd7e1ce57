import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

const HERE = dirname(fileURLToPath(import.meta.url));

/** Load one recorded v1 payload by fixture name (no extension). */
export function fixture<T>(name: string): T {
  const raw = readFileSync(join(HERE, "fixtures", "v1", `${name}.json`), "utf-8");
  return JSON.parse(raw) as T;
}

export interface RecordedCall {
  url: string;
  method: string;
  contentType: string | null;
  body: unknown;
}

export interface StubResponse {
  status?: number;
  payload: unknown;
}

/**
 * Replace global fetch with a scripted stub.  Responses are served in
 * order; running past the script throws.  Returns the call log so tests
 * can pin exact URLs, methods, and bodies.
 */
export function stubFetch(script: StubResponse[]): RecordedCall[] {
  const calls: RecordedCall[] = [];
  const queue = [...script];
  const fake = async (input: RequestInfo | URL, init?: RequestInit): Promise<Response> => {
    const headers = new Headers(init?.headers);
    calls.push({
      url: String(input),
      method: init?.method ?? "GET",
      contentType: headers.get("content-type"),
      body: init?.body ? JSON.parse(String(init.body)) : null,
    });
    const next = queue.shift();
    if (!next) {
      throw new Error(`unexpected fetch: ${init?.method ?? "GET"} ${String(input)}`);
    }
    return new Response(JSON.stringify(next.payload), {
      status: next.status ?? 200,
      headers: { "content-type": "application/json" },
    });
  };
  globalThis.fetch = fake as typeof fetch;
  return calls;
}

/** Replace global fetch with one that fails at the network level. */
export function stubFetchFailure(message: string): void {
  globalThis.fetch = (async () => {
    throw new TypeError(message);
  }) as typeof fetch;
}
