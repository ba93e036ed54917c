/**
 * Single observable session store. The wizard advances View 1 -> 2 -> 3;
 * going back never clears what was picked further ahead, so returning
 * forward is instant.
 */

import type { DatasetInfo, JobState, Report, SourceOption, Theme } from './types.js';

export type ViewNumber = 1 | 2 | 3;

export interface UiSession {
  view: ViewNumber;
  maxViewReached: ViewNumber;
  topic: string;
  recommendations: SourceOption[] | null;
  datasets: DatasetInfo[];
  selectedDataset: DatasetInfo | null;
  themes: Theme[] | null;
  themesFor: string | null;
  selectedTheme: Theme | null;
  activeJob: string | null;
  job: JobState | null;
  activeReport: string | null;
  report: Report | null;
  error: string | null;
  notice: string | null;
}

function initialSession(): UiSession {
  return {
    view: 1,
    maxViewReached: 1,
    topic: '',
    recommendations: null,
    datasets: [],
    selectedDataset: null,
    themes: null,
    themesFor: null,
    selectedTheme: null,
    activeJob: null,
    job: null,
    activeReport: null,
    report: null,
    error: null,
    notice: null,
  };
}

type Listener = () => void;

export class SessionStore {
  private state: UiSession = initialSession();
  private listeners = new Set<Listener>();

  get(): UiSession {
    return this.state;
  }

  set(patch: Partial<UiSession>): void {
    this.state = { ...this.state, ...patch };
    if (this.state.view > this.state.maxViewReached) {
      this.state = { ...this.state, maxViewReached: this.state.view };
    }
    this.listeners.forEach((listener) => listener());
  }

  /** Navigation is gated: forward only as far as already unlocked. */
  goTo(view: ViewNumber): void {
    if (view <= this.state.maxViewReached) {
      this.set({ view, error: null });
    }
  }

  reset(): void {
    this.state = initialSession();
    this.listeners.forEach((listener) => listener());
  }

  subscribe(listener: Listener): () => void {
    this.listeners.add(listener);
    return () => this.listeners.delete(listener);
  }
}

export const store = new SessionStore();
