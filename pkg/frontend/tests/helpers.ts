/** Test utilities: load recorded API fixtures and serve them over a fake fetch. */

import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import type { FetchLike } from "../src/api.js";

const here = dirname(fileURLToPath(import.meta.url));

export function fixture<T>(name: string): T {
  return JSON.parse(readFileSync(join(here, "fixtures", `${name}.json`), "utf-8")) as T;
}

const json = (data: unknown, status = 200): Response =>
  new Response(JSON.stringify(data), {
    status,
    headers: { "content-type": "application/json" },
  });

/**
 * Fake fetch wired to the recorded fixtures: results requests are routed
 * by family/scenario/timestamp/summary, everything else by path.
 */
export function fixtureFetch(overrides: Record<string, unknown> = {}): FetchLike {
  return async (url: string) => {
    const u = new URL(url, "http://fixtures.local");
    const params = u.searchParams;
    const key = u.pathname + (params.get("family") ? `#${params.get("family")}` : "");
    if (key in overrides) return json(overrides[key] as object);

    if (u.pathname.endsWith("/manifest")) return json(fixture("manifest"));
    if (u.pathname.match(/\/jobs\/[^/]+$/)) return json(fixture("job_done"));
    if (u.pathname.endsWith("/results")) {
      const family = params.get("family");
      if (family === "raster") {
        const name = `raster_${params.get("scenario")}_${params.get("timestamp")}_${params.get("summary")}`;
        try {
          return json(fixture(name));
        } catch {
          return json({ detail: "unknown selector" }, 404);
        }
      }
      try {
        return json(fixture(family ?? ""));
      } catch {
        return json({ detail: `no '${family}' table` }, 404);
      }
    }
    return json({ detail: "unexpected request in fixture mode" }, 500);
  };
}
