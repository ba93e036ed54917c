/**
 * Views 3/4: poll the job, then show subtopic sections ordered by quote
 * count. Every quote string rendered here is byte-equal to one returned
 * by the API; quotes that failed traceability carry a caution marker.
 */

import { downloadReport, getReport, saveTextAsFile } from '../api.js';
import { pollJob, PollHandle } from '../poll.js';
import { store } from '../store.js';
import type { Report, ReportSection } from '../types.js';

let activePoll: PollHandle | null = null;
let pollingFor: string | null = null;

export function renderReportView(root: HTMLElement): void {
  const session = store.get();
  if (!session.activeJob) {
    root.innerHTML = '<p class="muted">No analysis running yet.</p>';
    return;
  }

  if (session.report) {
    renderReport(root, session.report);
    return;
  }

  const job = session.job;
  if (job && job.phase === 'failed') {
    root.innerHTML = `
      <section class="panel">
        <h2>3. Report</h2>
        <div class="banner error" role="alert">Analysis failed: ${escapeHtml(job.error ?? 'unknown error')}</div>
      </section>
    `;
    return;
  }

  const phase = job?.phase ?? 'queued';
  const progress = job ? `${job.processed_chunks}/${job.total_chunks || '?'}` : '…';
  root.innerHTML = `
    <section class="panel">
      <h2>3. Report</h2>
      <p class="muted" id="job-progress">Working: ${escapeHtml(phase)} (${progress} chunks)</p>
    </section>
  `;

  ensurePolling(session.activeJob);
}

/** One poll loop per job id; re-renders never stack extra pollers. */
function ensurePolling(jobId: string): void {
  if (pollingFor === jobId) {
    return;
  }
  activePoll?.cancel();
  pollingFor = jobId;
  activePoll = pollJob(jobId, (job) => store.set({ job }));
  activePoll.done
    .then(async (job) => {
      if (job.phase === 'done' && job.report_id) {
        const report = await getReport(job.report_id);
        store.set({ activeReport: job.report_id, report });
      }
    })
    .catch(() => {
      store.set({ error: 'Lost contact with the analysis job.' });
    })
    .finally(() => {
      if (pollingFor === jobId) {
        pollingFor = null;
        activePoll = null;
      }
    });
}

function renderReport(root: HTMLElement, report: Report): void {
  const ordered = [...report.sections].sort(sectionOrder);
  root.innerHTML = `
    <section class="panel">
      <h2>3. ${escapeHtml(report.theme.title)}</h2>
      <p class="muted">
        ${escapeHtml(report.source_label)} ·
        ${report.totals.quotes} quotes
        (${report.totals.traceable} traceable, ${report.totals.untraceable} flagged)
      </p>
      <div class="row">
        <button id="download-jsonl">Download JSONL</button>
        <button id="download-md">Download Markdown</button>
      </div>
      <div id="sections"></div>
    </section>
  `;

  const sections = root.querySelector<HTMLElement>('#sections')!;
  for (const section of ordered) {
    sections.appendChild(renderSection(section));
  }

  root
    .querySelector<HTMLButtonElement>('#download-jsonl')!
    .addEventListener('click', () => void download(report.report_id, 'jsonl'));
  root
    .querySelector<HTMLButtonElement>('#download-md')!
    .addEventListener('click', () => void download(report.report_id, 'markdown'));
}

/** Busiest subtopics first; ties keep code order for stability. */
export function sectionOrder(a: ReportSection, b: ReportSection): number {
  return b.quote_count - a.quote_count || a.subtopic.code - b.subtopic.code;
}

function renderSection(section: ReportSection): HTMLElement {
  const wrapper = document.createElement('section');
  wrapper.className = 'subtopic';
  wrapper.dataset.code = String(section.subtopic.code);

  const header = document.createElement('h3');
  header.innerHTML = `${escapeHtml(section.subtopic.name)}
    <span class="count" data-role="quote-count">${section.quote_count}</span>`;
  wrapper.appendChild(header);

  const description = document.createElement('p');
  description.className = 'muted';
  description.textContent = section.subtopic.description;
  wrapper.appendChild(description);

  const list = document.createElement('ul');
  list.className = 'entries';
  for (const entry of section.entries) {
    const item = document.createElement('li');
    item.className = 'entry';

    const summaryRow = document.createElement('div');
    summaryRow.className = 'summary-row';
    const summary = document.createElement('span');
    summary.className = 'summary';
    summary.textContent = entry.summary;
    summaryRow.appendChild(summary);

    if (!entry.traceable) {
      const caution = document.createElement('span');
      caution.className = 'caution';
      caution.setAttribute('data-role', 'untraceable-marker');
      caution.title = 'This quote could not be matched verbatim to its source thread.';
      caution.textContent = '⚠ unverified';
      summaryRow.appendChild(caution);
    }

    const toggle = document.createElement('button');
    toggle.className = 'expand';
    toggle.textContent = 'Show quote';
    summaryRow.appendChild(toggle);
    item.appendChild(summaryRow);

    const detail = document.createElement('div');
    detail.className = 'quote-detail';
    detail.hidden = true;
    const quote = document.createElement('blockquote');
    quote.textContent = entry.quote;
    detail.appendChild(quote);
    const source = document.createElement('p');
    source.className = 'muted source';
    source.textContent = entry.source_id ? `source: ${entry.source_id}` : 'source: unresolved';
    detail.appendChild(source);
    item.appendChild(detail);

    toggle.addEventListener('click', () => {
      detail.hidden = !detail.hidden;
      toggle.textContent = detail.hidden ? 'Show quote' : 'Hide quote';
    });

    list.appendChild(item);
  }
  wrapper.appendChild(list);
  return wrapper;
}

async function download(reportId: string, format: 'jsonl' | 'markdown'): Promise<void> {
  try {
    const { filename, text } = await downloadReport(reportId, format);
    const mime = format === 'jsonl' ? 'application/x-ndjson' : 'text/markdown';
    saveTextAsFile(filename, text, mime);
  } catch {
    store.set({ error: 'Download failed.' });
  }
}

function escapeHtml(text: string): string {
  const div = document.createElement('div');
  div.textContent = text;
  return div.innerHTML;
}
