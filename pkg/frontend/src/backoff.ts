// Exponential-backoff polling that stops on terminal job states.

export interface PollOptions {
  baseMs: number;
  factor: number;
  maxMs: number;
  timeoutMs: number;
}

export const DEFAULT_POLL: PollOptions = {
  baseMs: 250,
  factor: 2,
  maxMs: 4000,
  timeoutMs: 120_000,
};

export function backoffDelays(opts: PollOptions, attempts: number): number[] {
  const delays: number[] = [];
  for (let i = 0; i < attempts; i++) {
    delays.push(Math.min(opts.baseMs * opts.factor ** i, opts.maxMs));
  }
  return delays;
}

const sleep = (ms: number) => new Promise<void>((resolve) => setTimeout(resolve, ms));

/** Poll `fn` until `isTerminal` accepts its result or the timeout hits. */
export async function pollUntil<T>(
  fn: () => Promise<T>,
  isTerminal: (value: T) => boolean,
  opts: PollOptions = DEFAULT_POLL,
): Promise<T> {
  const started = Date.now();
  let attempt = 0;
  for (;;) {
    const value = await fn();
    if (isTerminal(value)) {
      return value;
    }
    if (Date.now() - started > opts.timeoutMs) {
      throw new Error("polling timed out");
    }
    await sleep(Math.min(opts.baseMs * opts.factor ** attempt, opts.maxMs));
    attempt += 1;
  }
}
