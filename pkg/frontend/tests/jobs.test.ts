import { describe, expect, it } from "vitest";

import type { ApiClient, JobJson } from "../src/api.js";
import { JobFailure, pollJob } from "../src/jobs.js";

function jobWith(status: JobJson["status"], error: JobJson["error"] = null): JobJson {
  return {
    job_id: 1,
    status,
    progress: { phase: "backfit" },
    error,
    result: status === "converged" ? "model" : null,
    spec: null,
    history: [[status, 0.0]],
  } as unknown as JobJson;
}

function sequenceClient(statuses: JobJson["status"][], error: JobJson["error"] = null) {
  let call = 0;
  return {
    calls: () => call,
    client: {
      job: () => {
        const status = statuses[Math.min(call, statuses.length - 1)];
        call += 1;
        return Promise.resolve(jobWith(status ?? "converged", error));
      },
    } as unknown as ApiClient,
  };
}

describe("pollJob", () => {
  it("backs off exponentially between polls", async () => {
    const { client } = sequenceClient([
      "queued",
      "running",
      "running",
      "converged",
    ]);
    const waits: number[] = [];
    const seen: string[] = [];
    const job = await pollJob(client, 1, {
      sleep: (ms) => {
        waits.push(ms);
        return Promise.resolve();
      },
      onUpdate: (j) => seen.push(j.status),
    });
    expect(job.status).toBe("converged");
    expect(waits).toEqual([250, 500, 1000]);
    expect(seen).toEqual(["queued", "running", "running", "converged"]);
  });

  it("caps the delay at maxMs", async () => {
    const { client } = sequenceClient([
      ...Array<JobJson["status"]>(7).fill("running"),
      "converged",
    ]);
    const waits: number[] = [];
    await pollJob(client, 1, {
      sleep: (ms) => {
        waits.push(ms);
        return Promise.resolve();
      },
    });
    expect(waits).toEqual([250, 500, 1000, 2000, 4000, 4000, 4000]);
  });

  it("honours custom base and cap", async () => {
    const { client } = sequenceClient(["running", "running", "converged"]);
    const waits: number[] = [];
    await pollJob(client, 1, {
      baseMs: 10,
      maxMs: 15,
      sleep: (ms) => {
        waits.push(ms);
        return Promise.resolve();
      },
    });
    expect(waits).toEqual([10, 15]);
  });

  it("rejects with the failed job attached", async () => {
    const envelope = {
      type: "estimation_error",
      message: "design matrix is singular",
      detail: {},
    };
    const { client } = sequenceClient(["running", "failed"], envelope);
    const failure = await pollJob(client, 1, {
      sleep: () => Promise.resolve(),
    }).catch((e) => e);
    expect(failure).toBeInstanceOf(JobFailure);
    expect(failure.job.status).toBe("failed");
    expect(failure.message).toBe("estimation_error: design matrix is singular");
  });

  it("treats cancellation as terminal", async () => {
    const { client } = sequenceClient(["cancelled"]);
    const failure = await pollJob(client, 1, {
      sleep: () => Promise.resolve(),
    }).catch((e) => e);
    expect(failure).toBeInstanceOf(JobFailure);
    expect(failure.message).toBe("job 1 cancelled");
  });
});
