/** Test utilities: recorded-fixture loading and a fixture-backed fetch.
 *
 * Everything the UI shows in these tests comes from JSON/CSV captured from
 * the real service by scripts/record_fixtures.py; no live engine runs.
 */

import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import type { FetchLike } from "../src/api.js";

const FIXTURES = join(dirname(fileURLToPath(import.meta.url)), "..", "src", "fixtures");

export function fixtureText(name: string): string {
  return readFileSync(join(FIXTURES, name), "utf-8");
}

export function fixture<T>(name: string): T {
  return JSON.parse(fixtureText(name)) as T;
}

export interface RecordedCall {
  url: string;
  method: string;
  body: unknown;
}

export interface FixtureFetch {
  fetchFn: FetchLike;
  calls: RecordedCall[];
  callsMatching(fragment: string): RecordedCall[];
}

/** Route table: first substring match wins; values are fixture file names,
 * raw payloads, or handler functions. */
export type Routes = Array<
  [string, string | object | ((url: string, init?: RequestInit) => { status?: number; body: string | object })]
>;

export function fixtureFetch(routes: Routes): FixtureFetch {
  const calls: RecordedCall[] = [];
  const fetchFn: FetchLike = async (url, init) => {
    const method = init?.method ?? "GET";
    let body: unknown = null;
    if (typeof init?.body === "string") {
      try {
        body = JSON.parse(init.body);
      } catch {
        body = init.body;
      }
    } else if (init?.body) {
      body = init.body;
    }
    calls.push({ url, method, body });
    for (const [fragment, target] of routes) {
      if (!url.includes(fragment)) continue;
      let status = 200;
      let payload: string | object;
      if (typeof target === "function") {
        const out = target(url, init);
        status = out.status ?? 200;
        payload = out.body;
      } else if (typeof target === "string" && target.endsWith(".json")) {
        payload = fixtureText(target);
      } else if (typeof target === "string" && target.endsWith(".csv")) {
        payload = fixtureText(target);
      } else {
        payload = target;
      }
      const text = typeof payload === "string" ? payload : JSON.stringify(payload);
      const contentType = (typeof target === "string" && target.endsWith(".csv"))
        ? "text/csv"
        : "application/json";
      return new Response(text, {
        status,
        headers: { "Content-Type": contentType, "X-Engine-Version": "fixture" },
      });
    }
    return new Response(JSON.stringify({ detail: `no fixture route for ${url}` }), {
      status: 404,
      headers: { "Content-Type": "application/json" },
    });
  };
  return {
    fetchFn,
    calls,
    callsMatching: (fragment: string) => calls.filter((c) => c.url.includes(fragment)),
  };
}

export function host(): HTMLElement {
  const el = document.createElement("div");
  document.body.appendChild(el);
  return el;
}
