/**
 * Job polling: starts at 1 s, backs off to 5 s, and never stacks
 * requests (a slow response simply delays the next tick).
 */

import { getJob } from './api.js';
import type { JobState } from './types.js';

export const INITIAL_INTERVAL_MS = 1000;
export const MAX_INTERVAL_MS = 5000;

export function nextInterval(current: number): number {
  return Math.min(Math.round(current * 1.5), MAX_INTERVAL_MS);
}

export interface PollHandle {
  cancel(): void;
  done: Promise<JobState>;
}

export function pollJob(
  jobId: string,
  onUpdate: (job: JobState) => void,
  intervalMs: number = INITIAL_INTERVAL_MS,
): PollHandle {
  let cancelled = false;
  let timer: ReturnType<typeof setTimeout> | null = null;

  const done = new Promise<JobState>((resolve, reject) => {
    let interval = intervalMs;

    const tick = async () => {
      if (cancelled) {
        return;
      }
      try {
        const job = await getJob(jobId);
        if (cancelled) {
          return;
        }
        onUpdate(job);
        if (job.phase === 'done' || job.phase === 'failed') {
          resolve(job);
          return;
        }
      } catch (error) {
        reject(error);
        return;
      }
      interval = nextInterval(interval);
      timer = setTimeout(tick, interval);
    };

    // first check immediately so warm-cache jobs resolve without delay
    void tick();
  });

  return {
    cancel() {
      cancelled = true;
      if (timer !== null) {
        clearTimeout(timer);
      }
    },
    done,
  };
}
