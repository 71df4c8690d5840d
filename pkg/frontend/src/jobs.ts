/**
 * Training-job polling with exponential backoff. The delay doubles on
 * every poll until the cap; a terminal status resolves or rejects.
 */

import type { ApiClient, JobJson } from "./api.js";

export interface PollOptions {
  baseMs?: number;
  factor?: number;
  maxMs?: number;
  onUpdate?: (job: JobJson) => void;
  sleep?: (ms: number) => Promise<void>;
}

export class JobFailure extends Error {
  constructor(public job: JobJson) {
    super(
      job.error
        ? `${job.error.type}: ${job.error.message}`
        : `job ${job.job_id} ${job.status}`,
    );
  }
}

const defaultSleep = (ms: number) =>
  new Promise<void>((resolve) => setTimeout(resolve, ms));

export async function pollJob(
  client: ApiClient,
  jobId: number,
  options: PollOptions = {},
): Promise<JobJson> {
  const base = options.baseMs ?? 250;
  const factor = options.factor ?? 2;
  const max = options.maxMs ?? 4000;
  const sleep = options.sleep ?? defaultSleep;
  let delay = base;
  for (;;) {
    const job = await client.job(jobId);
    options.onUpdate?.(job);
    if (job.status === "converged") return job;
    if (job.status === "failed" || job.status === "cancelled") {
      throw new JobFailure(job);
    }
    await sleep(delay);
    delay = Math.min(delay * factor, max);
  }
}
