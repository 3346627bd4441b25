/** Job polling: 1-second interval until the job leaves the running states. */

import type { ApiClient } from "./api.js";
import type { JobView } from "./types.js";

export interface PollOptions {
  intervalMs?: number;
  sleep?: (ms: number) => Promise<void>;
}

const defaultSleep = (ms: number) => new Promise<void>((resolve) => setTimeout(resolve, ms));

export async function pollJob(
  client: ApiClient,
  jobId: string,
  onUpdate: (view: JobView) => void,
  options: PollOptions = {},
): Promise<JobView> {
  const interval = options.intervalMs ?? 1000;
  const sleep = options.sleep ?? defaultSleep;
  for (;;) {
    const view = await client.getJob(jobId);
    onUpdate(view);
    if (view.state === "done" || view.state === "failed") return view;
    await sleep(interval);
  }
}
