/**
 * View 2: nine suggested themes for the chosen source plus a free-text
 * field. Search text matching a suggestion selects it; anything else
 * becomes a custom theme. Either way, submitting starts the report job.
 */

import { ApiError, fetchThemes, registerCustomTheme, submitReport } from '../api.js';
import { store } from '../store.js';
import type { Theme } from '../types.js';

// dataset id whose theme request is currently in flight (re-renders
// while loading must not start a second request)
let themesRequestFor: string | null = null;

export function renderThemeView(root: HTMLElement): void {
  const session = store.get();
  const dataset = session.selectedDataset;
  if (!dataset) {
    root.innerHTML = '<p class="muted">Pick a data source first.</p>';
    return;
  }

  root.innerHTML = `
    <section class="panel">
      <h2>2. Pick a theme for ${escapeHtml(dataset.source_label)}</h2>
      <form id="custom-form" class="row">
        <input id="custom-input" type="text"
               placeholder="Search themes or type your own"
               aria-label="custom theme" />
        <button type="submit">Analyze</button>
      </form>
      <div id="theme-cards" class="cards"></div>
    </section>
  `;

  const cards = root.querySelector<HTMLElement>('#theme-cards')!;
  const form = root.querySelector<HTMLFormElement>('#custom-form')!;
  const input = root.querySelector<HTMLInputElement>('#custom-input')!;

  if (session.themes === null || session.themesFor !== dataset.dataset_id) {
    cards.innerHTML = '<p class="muted">Generating themes…</p>';
    if (themesRequestFor !== dataset.dataset_id) {
      themesRequestFor = dataset.dataset_id;
      fetchThemes(dataset.dataset_id)
        .then(({ themes }) => {
          store.set({ themes, themesFor: dataset.dataset_id, error: null });
        })
        .catch((error: unknown) => {
          store.set({
            themes: [],
            themesFor: dataset.dataset_id,
            error:
              error instanceof ApiError
                ? `Theme generation failed: ${error.message}`
                : 'Theme generation failed.',
          });
        })
        .finally(() => {
          if (themesRequestFor === dataset.dataset_id) {
            themesRequestFor = null;
          }
        });
    }
  } else {
    renderThemeCards(cards, session.themes);
  }

  form.addEventListener('submit', (event) => {
    event.preventDefault();
    const text = input.value.trim();
    if (!text) {
      return;
    }
    const existing = (store.get().themes ?? []).find(
      (theme) => theme.title.toLowerCase() === text.toLowerCase(),
    );
    if (existing) {
      void startJob(existing);
      return;
    }
    registerCustomTheme(dataset.dataset_id, text)
      .then(({ themes }) => {
        const theme = themes[0];
        if (theme) {
          void startJob(theme);
        }
      })
      .catch((error: unknown) => {
        store.set({
          error:
            error instanceof ApiError
              ? `Could not register theme: ${error.message}`
              : 'Could not register theme.',
        });
      });
  });
}

function renderThemeCards(container: HTMLElement, themes: Theme[]): void {
  container.innerHTML = '';
  for (const theme of themes) {
    const card = document.createElement('button');
    card.className = 'card theme-card';
    card.dataset.title = theme.title;
    card.innerHTML = `
      <strong>${escapeHtml(theme.title)}</strong>
      <span class="muted">${escapeHtml(theme.description)}</span>
    `;
    card.addEventListener('click', () => void startJob(theme));
    container.appendChild(card);
  }
}

async function startJob(theme: Theme): Promise<void> {
  const dataset = store.get().selectedDataset;
  if (!dataset) {
    return;
  }
  store.set({ selectedTheme: theme, error: null });
  try {
    const submitted = await submitReport(dataset.dataset_id, {
      title: theme.title,
      description: theme.description,
    });
    store.set({
      activeJob: submitted.job_id,
      activeReport: submitted.report_id ?? null,
      job: null,
      report: null,
      view: 3,
    });
  } catch (error) {
    if (error instanceof ApiError && error.status === 409 && error.body?.job_id) {
      // a job for this pair is already running: attach to it
      store.set({ activeJob: error.body.job_id, job: null, report: null, view: 3 });
      return;
    }
    store.set({
      error:
        error instanceof ApiError
          ? `Could not start analysis: ${error.message}`
          : 'Could not start analysis.',
    });
  }
}

function escapeHtml(text: string): string {
  const div = document.createElement('div');
  div.textContent = text;
  return div.innerHTML;
}
