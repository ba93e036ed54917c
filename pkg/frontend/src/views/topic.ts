/**
 * View 1: enter a research topic, get recommended data sources, or
 * upload a corpus CSV; picking a source unlocks the theme view.
 */

import { listDatasets, recommendSources, uploadDataset, ApiError } from '../api.js';
import { store } from '../store.js';
import type { DatasetInfo, SourceOption } from '../types.js';

export function renderTopicView(root: HTMLElement): void {
  const session = store.get();
  root.innerHTML = `
    <section class="panel">
      <h2>1. What do you want to learn about?</h2>
      <form id="topic-form" class="row">
        <input id="topic-input" type="text" placeholder="e.g. Climate Change"
               value="${escapeAttr(session.topic)}" aria-label="research topic" />
        <button type="submit">Find sources</button>
      </form>
      <p id="topic-validation" class="validation" hidden>Enter a topic first.</p>
      <div id="source-cards" class="cards"></div>
      <details class="upload">
        <summary>Or upload your own dataset (corpus CSV)</summary>
        <input id="upload-input" type="file" accept=".csv" aria-label="upload corpus csv" />
        <p id="upload-status" class="muted"></p>
      </details>
    </section>
  `;

  const form = root.querySelector<HTMLFormElement>('#topic-form')!;
  const input = root.querySelector<HTMLInputElement>('#topic-input')!;
  const validation = root.querySelector<HTMLElement>('#topic-validation')!;
  const cards = root.querySelector<HTMLElement>('#source-cards')!;
  const upload = root.querySelector<HTMLInputElement>('#upload-input')!;
  const uploadStatus = root.querySelector<HTMLElement>('#upload-status')!;

  form.addEventListener('submit', (event) => {
    event.preventDefault();
    const topic = input.value.trim();
    if (!topic) {
      validation.hidden = false; // inline validation, no request
      return;
    }
    validation.hidden = true;
    void searchSources(topic);
  });

  upload.addEventListener('change', () => {
    const file = upload.files?.[0];
    if (!file) {
      return;
    }
    uploadDataset(file)
      .then(async () => {
        uploadStatus.textContent = `Uploaded ${file.name}.`;
        const { datasets } = await listDatasets();
        store.set({ datasets });
      })
      .catch((error: unknown) => {
        uploadStatus.textContent =
          error instanceof ApiError ? `Upload failed: ${error.message}` : 'Upload failed.';
      });
  });

  renderCards(cards);
}

async function searchSources(topic: string): Promise<void> {
  store.set({ topic, error: null });
  try {
    const [{ sources }, { datasets }] = await Promise.all([
      recommendSources(topic),
      listDatasets(),
    ]);
    store.set({ recommendations: sources, datasets });
  } catch (error) {
    store.set({
      error:
        error instanceof ApiError
          ? `Could not fetch recommendations: ${error.message}`
          : 'Could not fetch recommendations.',
    });
  }
}

function renderCards(container: HTMLElement): void {
  const { recommendations, datasets } = store.get();
  container.innerHTML = '';
  if (recommendations === null && datasets.length === 0) {
    return;
  }
  const byLabel = new Map<string, DatasetInfo>(datasets.map((d) => [d.source_label, d]));
  const options: SourceOption[] =
    recommendations && recommendations.length > 0
      ? recommendations
      : datasets.map((d) => ({ label: d.source_label, thread_count: d.thread_count }));
  if (options.length === 0) {
    const empty = document.createElement('p');
    empty.className = 'muted';
    empty.textContent = 'No recommended sources for this topic. Upload a dataset below.';
    container.appendChild(empty);
    return;
  }
  for (const option of options) {
    const dataset = byLabel.get(option.label);
    const card = document.createElement('button');
    card.className = 'card source-card';
    card.dataset.label = option.label;
    card.innerHTML = `
      <strong>${escapeHtml(option.label)}</strong>
      <span class="count">${option.thread_count} threads</span>
    `;
    if (!dataset) {
      card.disabled = true;
      card.title = 'No uploaded dataset carries this label';
    } else {
      card.addEventListener('click', () => {
        store.set({ selectedDataset: dataset, view: 2 });
      });
    }
    container.appendChild(card);
  }
}

function escapeHtml(text: string): string {
  const div = document.createElement('div');
  div.textContent = text;
  return div.innerHTML;
}

function escapeAttr(text: string): string {
  return escapeHtml(text).replaceAll('"', '&quot;');
}
