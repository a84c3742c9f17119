/** In-memory implementation of the study API contract, installed as fetch.
 * Mirrors the service semantics: lowest not-fully-annotated comparison per
 * annotator, last-write-wins per (comparison, annotator, dimension), and an
 * export stream of the full history. */

export const DIMENSIONS = [
  'clarity_coherence',
  'coverage_relevance',
  'correctness_soundness',
];

export interface MockComparison {
  comparison_id: string;
  input_summary: string;
  ground_truth: number;
  side_a: { prediction: string; trace: string };
  side_b: { prediction: string; trace: string };
}

export interface RecordedPreference {
  comparison_id: string;
  annotator_id: string;
  dimension: string;
  choice: string;
}

export function sampleComparisons(count: number): MockComparison[] {
  return Array.from({ length: count }, (_, i) => ({
    comparison_id: `P${String(i).padStart(2, '0')}#0:pneumonia`,
    input_summary: `Index visit diagnoses: fever; cough. Target disease: pneumonia. (case ${i})`,
    ground_truth: i % 2,
    side_a: { prediction: 'yes', trace: `First trace for case ${i}.\nConclusion: Yes` },
    side_b: { prediction: 'no', trace: `Second trace for case ${i}.\nConclusion: No` },
  }));
}

export class MockStudyServer {
  preferences: RecordedPreference[] = [];
  failNextRequests = 0;

  constructor(
    public comparisons: MockComparison[],
    public tiesEnabled = false,
  ) {}

  private latest(): Map<string, RecordedPreference> {
    const slots = new Map<string, RecordedPreference>();
    for (const record of this.preferences) {
      slots.set(
        `${record.comparison_id}|${record.annotator_id}|${record.dimension}`,
        record,
      );
    }
    return slots;
  }

  private nextPayload(annotator: string): object {
    const slots = this.latest();
    const isDone = (c: MockComparison) =>
      DIMENSIONS.every((d) => slots.has(`${c.comparison_id}|${annotator}|${d}`));
    const ordered = [...this.comparisons].sort((a, b) =>
      a.comparison_id.localeCompare(b.comparison_id),
    );
    const completed = ordered.filter(isDone).length;
    const progress = { completed, total: ordered.length };
    const pending = ordered.find((c) => !isDone(c));
    if (!pending) return { done: true, progress };
    return {
      ...pending,
      progress,
      dimensions: DIMENSIONS,
      ties_enabled: this.tiesEnabled,
    };
  }

  exportLines(): string[] {
    return this.preferences.map((p) => JSON.stringify(p));
  }

  install(): void {
    globalThis.fetch = (async (input: RequestInfo | URL, init?: RequestInit) => {
      const url = String(input);
      if (this.failNextRequests > 0) {
        this.failNextRequests -= 1;
        return new Response('injected failure', { status: 500 });
      }
      if (url.startsWith('/api/study/next')) {
        const annotator = new URLSearchParams(url.split('?')[1]).get('annotator') ?? '';
        return Response.json(this.nextPayload(annotator));
      }
      if (url.startsWith('/api/study/preference')) {
        const body = JSON.parse(String(init?.body)) as RecordedPreference;
        const known = this.comparisons.some(
          (c) => c.comparison_id === body.comparison_id,
        );
        if (!known) return new Response('unknown comparison', { status: 404 });
        if (!DIMENSIONS.includes(body.dimension)) {
          return new Response('unknown dimension', { status: 400 });
        }
        const allowed = this.tiesEnabled ? ['A', 'B', 'tie'] : ['A', 'B'];
        if (!allowed.includes(body.choice)) {
          return new Response('invalid choice', { status: 400 });
        }
        this.preferences.push(body);
        return Response.json({ status: 'recorded' });
      }
      if (url.startsWith('/api/study/export')) {
        return new Response(this.exportLines().join('\n'));
      }
      return new Response('not found', { status: 404 });
    }) as typeof fetch;
  }
}
