import { describe, expect, it } from "vitest";

import { backoffDelays, pollUntil } from "../../src/backoff.js";

describe("backoffDelays", () => {
  it("grows exponentially and caps", () => {
    const delays = backoffDelays({ baseMs: 100, factor: 2, maxMs: 1000, timeoutMs: 0 }, 6);
    expect(delays).toEqual([100, 200, 400, 800, 1000, 1000]);
  });
});

describe("pollUntil", () => {
  it("stops on the first terminal state", async () => {
    const states = ["running", "running", "done"];
    let calls = 0;
    const result = await pollUntil(
      async () => states[Math.min(calls++, states.length - 1)],
      (s) => s === "done",
      { baseMs: 1, factor: 2, maxMs: 5, timeoutMs: 1000 },
    );
    expect(result).toBe("done");
    expect(calls).toBe(3);
  });

  it("stops on failed states too when terminal covers them", async () => {
    const result = await pollUntil(
      async () => "failed",
      (s) => s === "done" || s === "failed",
      { baseMs: 1, factor: 2, maxMs: 5, timeoutMs: 1000 },
    );
    expect(result).toBe("failed");
  });

  it("times out on a never-terminal job", async () => {
    await expect(
      pollUntil(async () => "running", (s) => s === "done", {
        baseMs: 1,
        factor: 2,
        maxMs: 2,
        timeoutMs: 20,
      }),
    ).rejects.toThrow("polling timed out");
  });

  it("waits between attempts with growing delays", async () => {
    const stamps: number[] = [];
    let calls = 0;
    await pollUntil(
      async () => {
        stamps.push(Date.now());
        calls += 1;
        return calls >= 4 ? "done" : "running";
      },
      (s) => s === "done",
      { baseMs: 10, factor: 2, maxMs: 100, timeoutMs: 5000 },
    );
    const gaps = stamps.slice(1).map((t, i) => t - stamps[i]);
    expect(gaps[1]).toBeGreaterThanOrEqual(gaps[0]);
    expect(gaps[2]).toBeGreaterThanOrEqual(gaps[1]);
  });
});
