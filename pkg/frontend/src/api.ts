/** Thin typed client over the job service; fetch is injectable for tests. */

import type {
  AnalysisConfigDoc,
  JobView,
  Manifest,
  RasterGrid,
  SubmitResponse,
  TableRecord,
  ValidationRow,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    message: string,
    readonly status: number,
    readonly validation: ValidationRow[] = [],
  ) {
    super(message);
  }
}

async function asJson<T>(resp: Response): Promise<T> {
  if (!resp.ok) {
    let validation: ValidationRow[] = [];
    let detail = `${resp.status}`;
    try {
      const body = await resp.json();
      if (body && typeof body.detail === "object" && body.detail?.validation) {
        validation = body.detail.validation as ValidationRow[];
        detail = "validation failed";
      } else if (body?.detail) {
        detail = String(body.detail);
      }
    } catch {
      /* non-JSON error body */
    }
    throw new ApiError(detail, resp.status, validation);
  }
  return (await resp.json()) as T;
}

const query = (params: Record<string, string | undefined>): string => {
  const q = new URLSearchParams();
  for (const [key, value] of Object.entries(params)) {
    if (value !== undefined) q.set(key, value);
  }
  const s = q.toString();
  return s ? `?${s}` : "";
};

export interface RasterSelector {
  species?: string;
  variant?: string;
  scenario: string;
  timestamp: string;
  summary: string;
}

export class ApiClient {
  constructor(
    private readonly base: string = "",
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  submitJob(config: AnalysisConfigDoc, start = true): Promise<SubmitResponse> {
    return this.fetchFn(`${this.base}/jobs`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ config, start }),
    }).then((r) => asJson<SubmitResponse>(r));
  }

  async uploadFile(jobId: string, path: string, file: Blob): Promise<void> {
    const form = new FormData();
    form.append("file", file, path.split("/").pop() ?? "upload");
    const url = `${this.base}/jobs/${jobId}/files${query({ path })}`;
    await asJson(await this.fetchFn(url, { method: "POST", body: form }));
  }

  startJob(jobId: string): Promise<SubmitResponse> {
    return this.fetchFn(`${this.base}/jobs/${jobId}/start`, { method: "POST" }).then((r) =>
      asJson<SubmitResponse>(r),
    );
  }

  getJob(jobId: string): Promise<JobView> {
    return this.fetchFn(`${this.base}/jobs/${jobId}`).then((r) => asJson<JobView>(r));
  }

  getManifest(jobId: string): Promise<Manifest> {
    return this.fetchFn(`${this.base}/jobs/${jobId}/manifest`).then((r) => asJson<Manifest>(r));
  }

  getRaster(jobId: string, sel: RasterSelector): Promise<RasterGrid> {
    const url = `${this.base}/jobs/${jobId}/results${query({ family: "raster", ...sel })}`;
    return this.fetchFn(url).then((r) => asJson<RasterGrid>(r));
  }

  getTable(
    jobId: string,
    family: string,
    sel: { species?: string; variant?: string } = {},
  ): Promise<TableRecord[]> {
    const url = `${this.base}/jobs/${jobId}/results${query({ family, format: "json", ...sel })}`;
    return this.fetchFn(url).then((r) => asJson<TableRecord[]>(r));
  }
}
