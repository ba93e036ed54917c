/**
 * End-to-end wizard flow against fixture payloads captured from the real
 * backend: Action 1 (topic + source) -> Action 2 (theme) -> Action 3
 * (report), plus the rendering invariants.
 */

import { afterEach, beforeEach, describe, expect, it } from 'vitest';

import { renderApp } from '../src/app.js';
import { store } from '../src/store.js';
import type { JobState, Report, SourceOption, Theme } from '../src/types.js';
import { FetchLogEntry, fixture, fixtureText, flush, mockFetch } from './helpers.js';

const datasets = fixture<{ datasets: { dataset_id: string; source_label: string; thread_count: number }[] }>('datasets.json');
const recommendations = fixture<{ sources: SourceOption[] }>('recommendations.json');
const themes = fixture<{ themes: Theme[] }>('themes.json');
const submitAccepted = fixture<{ job_id: string; phase: string }>('submit_accepted.json');
const jobDone = fixture<JobState>('job_done.json');
const jobFailed = fixture<JobState>('job_failed.json');
const reportMain = fixture<Report>('report_main.json');
const reportAlt = fixture<Report>('report_alt.json');
const reportJsonl = fixtureText('report_main.jsonl');

let root: HTMLElement;
let dispose: () => void = () => {};

function standardRoutes() {
  return [
    { method: 'GET', path: /\/v1\/datasets$/, reply: () => ({ json: datasets }) },
    { method: 'POST', path: /\/v1\/recommendations$/, reply: () => ({ json: recommendations }) },
    { method: 'POST', path: /\/v1\/datasets\/[^/]+\/themes$/, reply: () => ({ json: themes }) },
    { method: 'POST', path: /\/v1\/reports$/, reply: () => ({ status: 202, json: submitAccepted }) },
    { method: 'GET', path: /\/v1\/jobs\//, reply: () => ({ json: jobDone }) },
    {
      method: 'GET',
      path: /\/v1\/reports\/[^/]+\/download\?format=jsonl$/,
      reply: () => ({ text: reportJsonl }),
    },
    { method: 'GET', path: /\/v1\/reports\/[^/]+$/, reply: () => ({ json: reportMain }) },
  ];
}

beforeEach(() => {
  store.reset();
  document.body.innerHTML = '<div id="app"></div>';
  root = document.getElementById('app')!;
});

afterEach(() => {
  dispose();
  dispose = () => {};
});

async function driveToReport(log: FetchLogEntry[]): Promise<void> {
  dispose = renderApp(root);

  // Action 1: topic in, recommendations out, pick a source
  const input = root.querySelector<HTMLInputElement>('#topic-input')!;
  input.value = 'Parenting teens online';
  root.querySelector<HTMLFormElement>('#topic-form')!.dispatchEvent(
    new Event('submit', { bubbles: true, cancelable: true }),
  );
  await flush();

  const sourceCard = root.querySelector<HTMLButtonElement>('.source-card:not(:disabled)')!;
  expect(sourceCard, 'a selectable source card').toBeTruthy();
  sourceCard.click();
  await flush();
  expect(store.get().view).toBe(2);

  // Action 2: nine suggested themes, pick the first
  const themeCards = root.querySelectorAll<HTMLButtonElement>('.theme-card');
  expect(themeCards.length).toBe(9);
  themeCards[0]!.click();
  await flush();
  expect(store.get().view).toBe(3);

  // Action 3: job polled to done, report rendered
  await flush(10);
  expect(store.get().report).not.toBeNull();
  expect(log.some((e) => e.url.includes('/v1/jobs/'))).toBe(true);
}

describe('three-action wizard flow', () => {
  it('completes Action 1 -> Action 2 -> Action 3 against the fixture backend', async () => {
    const log = mockFetch(standardRoutes());
    await driveToReport(log);

    const heading = root.querySelector('h2')!;
    expect(heading.textContent).toContain(reportMain.theme.title);
  });

  it('renders recommendation cards with thread counts from the payload', async () => {
    mockFetch(standardRoutes());
    dispose = renderApp(root);
    const input = root.querySelector<HTMLInputElement>('#topic-input')!;
    input.value = 'Parenting teens online';
    root.querySelector<HTMLFormElement>('#topic-form')!.dispatchEvent(
      new Event('submit', { bubbles: true, cancelable: true }),
    );
    await flush();
    for (const option of recommendations.sources) {
      const card = root.querySelector(`.source-card[data-label="${option.label}"]`)!;
      expect(card.textContent).toContain(`${option.thread_count} threads`);
    }
  });

  it('renders every section count equal to the payload count, ordered by count', async () => {
    const log = mockFetch(standardRoutes());
    await driveToReport(log);

    const rendered = [...root.querySelectorAll<HTMLElement>('.subtopic')].map((el) => ({
      code: Number(el.dataset.code),
      count: Number(el.querySelector('[data-role="quote-count"]')!.textContent),
    }));
    expect(rendered.length).toBe(reportMain.sections.length);
    const byCode = new Map(reportMain.sections.map((s) => [s.subtopic.code, s.quote_count]));
    for (const section of rendered) {
      expect(section.count).toBe(byCode.get(section.code));
    }
    const counts = rendered.map((s) => s.count);
    expect([...counts].sort((a, b) => b - a)).toEqual(counts);
  });

  it('expanding an entry reveals the full quote byte-equal to the payload', async () => {
    const log = mockFetch(standardRoutes());
    await driveToReport(log);

    const section = reportMain.sections.find((s) => s.quote_count > 0)!;
    const sectionEl = root.querySelector<HTMLElement>(`.subtopic[data-code="${section.subtopic.code}"]`)!;
    const entry = sectionEl.querySelector<HTMLElement>('.entry')!;
    const detail = entry.querySelector<HTMLElement>('.quote-detail')!;
    expect(detail.hidden).toBe(true);
    entry.querySelector<HTMLButtonElement>('.expand')!.click();
    expect(detail.hidden).toBe(false);
    const quoteText = detail.querySelector('blockquote')!.textContent!;
    const payloadQuotes = section.entries.map((e) => e.quote);
    expect(payloadQuotes).toContain(quoteText);
  });

  it('downloads JSONL named after the report with 1 + totals.quotes lines', async () => {
    const log = mockFetch(standardRoutes());

    const savedBlobs: Blob[] = [];
    const savedNames: string[] = [];
    (URL as any).createObjectURL = (blob: Blob) => {
      savedBlobs.push(blob);
      return 'blob:mock';
    };
    (URL as any).revokeObjectURL = () => {};
    const originalClick = HTMLAnchorElement.prototype.click;
    HTMLAnchorElement.prototype.click = function (this: HTMLAnchorElement) {
      savedNames.push(this.download);
    };

    try {
      await driveToReport(log);
      root.querySelector<HTMLButtonElement>('#download-jsonl')!.click();
      await flush();
    } finally {
      HTMLAnchorElement.prototype.click = originalClick;
    }

    expect(savedNames).toEqual([`report-${reportMain.report_id}.jsonl`]);
    const text = await savedBlobs[0]!.text();
    const lines = text.trim().split('\n');
    expect(lines.length).toBe(1 + reportMain.totals.quotes);
  });
});

describe('validation and error paths', () => {
  it('empty topic shows inline validation and sends no request', async () => {
    const log = mockFetch(standardRoutes());
    dispose = renderApp(root);
    root.querySelector<HTMLFormElement>('#topic-form')!.dispatchEvent(
      new Event('submit', { bubbles: true, cancelable: true }),
    );
    await flush();
    expect(root.querySelector<HTMLElement>('#topic-validation')!.hidden).toBe(false);
    expect(log.length).toBe(0);
  });

  it('uploading a CSV makes the dataset selectable', async () => {
    const uploaded = {
      dataset_id: 'dnew',
      source_label: 'uploaded-label',
      thread_count: 3,
    };
    const listing = { datasets: [...datasets.datasets] };
    mockFetch([
      {
        method: 'POST',
        path: /\/v1\/datasets$/,
        reply: () => {
          listing.datasets.push(uploaded);
          return { status: 201, json: uploaded };
        },
      },
      { method: 'GET', path: /\/v1\/datasets$/, reply: () => ({ json: listing }) },
    ]);
    dispose = renderApp(root);

    const fileInput = root.querySelector<HTMLInputElement>('#upload-input')!;
    const file = new File(['thread_id,subreddit,text\n'], 'mine.csv', { type: 'text/csv' });
    Object.defineProperty(fileInput, 'files', { value: [file] });
    fileInput.dispatchEvent(new Event('change', { bubbles: true }));
    await flush();

    expect(store.get().datasets.some((d) => d.dataset_id === 'dnew')).toBe(true);
    // with no recommendations yet, all datasets render as selectable cards
    const card = root.querySelector<HTMLButtonElement>('.source-card[data-label="uploaded-label"]');
    expect(card).toBeTruthy();
    expect(card!.disabled).toBe(false);
  });

  it('a failed job surfaces an error banner naming the stage', async () => {
    mockFetch([
      { method: 'GET', path: /\/v1\/jobs\//, reply: () => ({ json: jobFailed }) },
    ]);
    dispose = renderApp(root);
    store.set({
      selectedDataset: {
        dataset_id: jobFailed.dataset_id,
        source_label: 'parenting',
        thread_count: 50,
      },
      activeJob: jobFailed.job_id,
      view: 3,
    });
    await flush(10);
    const banner = root.querySelector('.banner.error:not([hidden])');
    expect(banner).toBeTruthy();
    expect(banner!.textContent).toContain('extracting stage');
  });

  it('renders untraceable markers when the payload flags quotes', async () => {
    mockFetch([]);
    dispose = renderApp(root);
    store.set({
      activeJob: 'job-x',
      report: reportAlt,
      activeReport: reportAlt.report_id,
      view: 3,
    });
    await flush();
    const markers = root.querySelectorAll('[data-role="untraceable-marker"]');
    expect(markers.length).toBe(reportAlt.totals.untraceable);
    expect(reportAlt.totals.untraceable).toBeGreaterThan(0);
  });
});

describe('navigation', () => {
  it('forward steps stay locked until reached, back preserves selections', async () => {
    const log = mockFetch(standardRoutes());
    dispose = renderApp(root);

    const stepButtons = () => [...root.querySelectorAll<HTMLButtonElement>('#steps button')];
    expect(stepButtons()[1]!.disabled).toBe(true);
    expect(stepButtons()[2]!.disabled).toBe(true);

    store.goTo(3); // gated: nothing unlocked yet
    expect(store.get().view).toBe(1);

    await driveToReport(log);
    expect(stepButtons()[0]!.disabled).toBe(false);

    stepButtons()[0]!.click();
    await flush();
    expect(store.get().view).toBe(1);
    expect(root.querySelector<HTMLInputElement>('#topic-input')!.value).toBe(
      'Parenting teens online',
    );
    expect(store.get().selectedTheme).not.toBeNull();

    stepButtons()[2]!.click();
    await flush();
    expect(store.get().view).toBe(3);
    expect(root.querySelector('h2')!.textContent).toContain(reportMain.theme.title);
  });
});
