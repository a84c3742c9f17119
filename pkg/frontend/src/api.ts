/** Typed client for the study service HTTP API. */

export interface SidePayload {
  prediction: string;
  trace: string;
}

export interface Progress {
  completed: number;
  total: number;
}

export interface ComparisonPayload {
  comparison_id: string;
  input_summary: string;
  ground_truth: number;
  side_a: SidePayload;
  side_b: SidePayload;
  progress: Progress;
  dimensions: string[];
  ties_enabled: boolean;
}

export interface DonePayload {
  done: true;
  progress: Progress;
}

export type NextPayload = ComparisonPayload | DonePayload;

export interface PreferenceBody {
  comparison_id: string;
  annotator_id: string;
  dimension: string;
  choice: string;
}

export function isDone(payload: NextPayload): payload is DonePayload {
  return (payload as DonePayload).done === true;
}

async function expectOk(response: Response): Promise<Response> {
  if (!response.ok) {
    const body = await response.text().catch(() => '');
    throw new Error(`${response.status}: ${body.slice(0, 120)}`);
  }
  return response;
}

export async function fetchNext(annotatorId: string): Promise<NextPayload> {
  const response = await expectOk(
    await fetch(`/api/study/next?annotator=${encodeURIComponent(annotatorId)}`),
  );
  return (await response.json()) as NextPayload;
}

export async function postPreference(body: PreferenceBody): Promise<void> {
  await expectOk(
    await fetch('/api/study/preference', {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(body),
    }),
  );
}
