/**
 * Typed client for the /v1 endpoints. The UI renders only what these
 * calls return; it never synthesizes analysis text of its own.
 */

import type {
  ApiErrorBody,
  DatasetInfo,
  JobState,
  Report,
  SourceOption,
  SubmitResponse,
  Theme,
} from './types.js';

let apiBase = '';

export function setApiBase(base: string): void {
  apiBase = base.replace(/\/+$/, '');
}

export function getApiBase(): string {
  return apiBase;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
    public body: ApiErrorBody | null = null,
  ) {
    super(message);
  }
}

async function request<T>(path: string, init?: RequestInit): Promise<T> {
  const response = await fetch(`${apiBase}${path}`, init);
  if (!response.ok) {
    let body: ApiErrorBody | null = null;
    try {
      body = (await response.json()) as ApiErrorBody;
    } catch {
      // non-JSON error body; fall through with what we have
    }
    throw new ApiError(
      response.status,
      body?.code ?? 'unknown',
      body?.message ?? `request failed with ${response.status}`,
      body,
    );
  }
  return (await response.json()) as T;
}

function postJson<T>(path: string, payload: unknown): Promise<T> {
  return request<T>(path, {
    method: 'POST',
    headers: { 'Content-Type': 'application/json' },
    body: JSON.stringify(payload),
  });
}

export function listDatasets(): Promise<{ datasets: DatasetInfo[] }> {
  return request('/v1/datasets');
}

export function uploadDataset(file: File): Promise<DatasetInfo> {
  const form = new FormData();
  form.append('file', file);
  return request('/v1/datasets', { method: 'POST', body: form });
}

export function recommendSources(topic: string): Promise<{ sources: SourceOption[] }> {
  return postJson('/v1/recommendations', { topic });
}

export function fetchThemes(datasetId: string): Promise<{ themes: Theme[] }> {
  return postJson(`/v1/datasets/${encodeURIComponent(datasetId)}/themes`, {});
}

export function registerCustomTheme(
  datasetId: string,
  title: string,
  description = '',
): Promise<{ themes: Theme[] }> {
  return postJson(`/v1/datasets/${encodeURIComponent(datasetId)}/themes`, {
    custom_theme: title,
    description,
  });
}

export function submitReport(
  datasetId: string,
  theme: { title: string; description?: string },
): Promise<SubmitResponse> {
  return postJson('/v1/reports', { dataset_id: datasetId, theme });
}

export function getJob(jobId: string): Promise<JobState> {
  return request(`/v1/jobs/${encodeURIComponent(jobId)}`);
}

export function getReport(reportId: string): Promise<Report> {
  return request(`/v1/reports/${encodeURIComponent(reportId)}`);
}

export async function downloadReport(
  reportId: string,
  format: 'jsonl' | 'markdown',
): Promise<{ filename: string; text: string }> {
  const response = await fetch(
    `${apiBase}/v1/reports/${encodeURIComponent(reportId)}/download?format=${format}`,
  );
  if (!response.ok) {
    throw new ApiError(response.status, 'download_failed', 'could not download report');
  }
  const suffix = format === 'jsonl' ? 'jsonl' : 'md';
  return { filename: `report-${reportId}.${suffix}`, text: await response.text() };
}

/** Trigger a browser download of the given text. */
export function saveTextAsFile(filename: string, text: string, mime: string): void {
  const blob = new Blob([text], { type: mime });
  const url = URL.createObjectURL(blob);
  const anchor = document.createElement('a');
  anchor.href = url;
  anchor.download = filename;
  document.body.appendChild(anchor);
  anchor.click();
  anchor.remove();
  URL.revokeObjectURL(url);
}
