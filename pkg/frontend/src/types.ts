// Payload shapes of the /v1 API, mirrored 1:1.

export interface SourceOption {
  label: string;
  thread_count: number;
}

export interface DatasetInfo {
  dataset_id: string;
  source_label: string;
  thread_count: number;
}

export interface Theme {
  title: string;
  description: string;
  origin: 'suggested' | 'user_defined';
}

export type JobPhase = 'queued' | 'extracting' | 'coding' | 'mapping' | 'done' | 'failed';

export interface JobState {
  job_id: string;
  dataset_id: string;
  theme: Theme;
  phase: JobPhase;
  processed_chunks: number;
  total_chunks: number;
  error: string | null;
  report_id: string | null;
  warnings: string[];
}

export interface SubmitResponse {
  job_id: string;
  phase: JobPhase;
  report_id?: string;
}

export interface ReportEntry {
  summary: string;
  quote: string;
  source_id: string;
  traceable: boolean;
}

export interface Subtopic {
  code: number;
  name: string;
  description: string;
}

export interface ReportSection {
  subtopic: Subtopic;
  quote_count: number;
  entries: ReportEntry[];
}

export interface Report {
  report_id: string;
  dataset_id: string;
  source_label: string;
  theme: Theme;
  code_count: number;
  totals: { quotes: number; traceable: number; untraceable: number };
  provenance: {
    prompt_version: string;
    model_id: string;
    created_at: string;
    warnings: string[];
  };
  sections: ReportSection[];
}

export interface ApiErrorBody {
  code: string;
  message: string;
  job_id?: string;
}
