/** Headless session driving the real DOM module against the mock API:
 * completes comparisons by click and by keyboard, checks the export, and
 * scans the rendered document for anything that could unblind a side. */

import { beforeEach, describe, expect, it } from 'vitest';

import { Controller } from '../src/main.js';
import { DIMENSIONS, MockStudyServer, sampleComparisons } from './mockServer.js';

function mount(): HTMLElement {
  document.body.innerHTML = '<main id="app" data-no-autoboot></main>';
  return document.getElementById('app') as HTMLElement;
}

function click(root: HTMLElement, testId: string): void {
  const node = root.querySelector(`[data-testid="${testId}"]`);
  expect(node, `missing [data-testid=${testId}]`).toBeTruthy();
  (node as HTMLElement).click();
}

function text(root: HTMLElement, testId: string): string {
  return root.querySelector(`[data-testid="${testId}"]`)?.textContent ?? '';
}

async function settle(): Promise<void> {
  // flush the fetch -> parse -> render chain, including timer-based steps
  for (let i = 0; i < 5; i += 1) {
    await new Promise((resolve) => setTimeout(resolve, 0));
  }
}

describe('review round trip', () => {
  let server: MockStudyServer;
  let root: HTMLElement;
  let controller: Controller;

  beforeEach(async () => {
    server = new MockStudyServer(sampleComparisons(3));
    server.install();
    root = mount();
    controller = new Controller(root, 'ann1');
    await controller.loadNext();
  });

  it('completes 3 comparisons and exports exactly 9 matching records', async () => {
    const entered: Record<string, Record<string, string>> = {};
    for (let round = 0; round < 3; round += 1) {
      const comparisonId = controller.state.payload!.comparison_id;
      const choices = { clarity_coherence: 'A', coverage_relevance: 'B', correctness_soundness: 'A' };
      entered[comparisonId] = choices;
      for (const [dimension, choice] of Object.entries(choices)) {
        click(root, `choice-${dimension}-${choice}`);
      }
      click(root, 'submit');
      await settle();
    }
    expect(root.querySelector('[data-testid="done-screen"]')).toBeTruthy();

    expect(server.preferences).toHaveLength(9);
    const exported = server.exportLines().map((line) => JSON.parse(line));
    expect(exported).toHaveLength(9);
    for (const record of exported) {
      expect(record.annotator_id).toBe('ann1');
      expect(entered[record.comparison_id][record.dimension]).toBe(record.choice);
    }
  });

  it('renders both panels, the summary, and the ground truth badge', () => {
    expect(text(root, 'panel-a')).toContain('Output A');
    expect(text(root, 'panel-b')).toContain('Output B');
    expect(text(root, 'summary')).toContain('Target disease: pneumonia');
    expect(text(root, 'ground-truth')).toContain('No'); // case 0 label is 0
    expect(text(root, 'trace-a')).toContain('First trace');
  });

  it('keyboard shortcuts: 1/2 choose and advance, Enter submits', async () => {
    const press = (key: string) =>
      document.dispatchEvent(new KeyboardEvent('keydown', { key, bubbles: true }));
    document.addEventListener('keydown', (event) => controller.onKey(event));

    press('1'); // clarity -> A, focus moves on
    press('2'); // coverage -> B
    press('1'); // correctness -> A
    expect(controller.state.choices).toEqual({
      clarity_coherence: 'A',
      coverage_relevance: 'B',
      correctness_soundness: 'A',
    });
    press('Enter');
    await settle();
    expect(server.preferences).toHaveLength(3);
    expect(text(root, 'progress')).toContain('Comparison 2 of 3');
  });

  it('blocks submission until all three dimensions are chosen', async () => {
    click(root, 'choice-clarity_coherence-A');
    click(root, 'choice-coverage_relevance-B');
    const submit = root.querySelector('[data-testid="submit"]') as HTMLButtonElement;
    expect(submit.disabled).toBe(true);
    expect(text(root, 'submit-hint')).toContain('all three');
    click(root, 'submit');
    await settle();
    expect(server.preferences).toHaveLength(0);
  });

  it('correcting a choice before submit reaches the export as the final value', async () => {
    click(root, 'choice-clarity_coherence-A');
    click(root, 'choice-clarity_coherence-B');
    click(root, 'choice-coverage_relevance-B');
    click(root, 'choice-correctness_soundness-A');
    click(root, 'submit');
    await settle();
    const clarity = server.preferences.find((p) => p.dimension === 'clarity_coherence');
    expect(clarity?.choice).toBe('B');
  });

  it('network failure shows a retry banner and preserves choices', async () => {
    click(root, 'choice-clarity_coherence-A');
    click(root, 'choice-coverage_relevance-B');
    click(root, 'choice-correctness_soundness-A');
    server.failNextRequests = 1;
    click(root, 'submit');
    await settle();
    expect(root.querySelector('[data-testid="error-banner"]')).toBeTruthy();
    expect(controller.state.choices.clarity_coherence).toBe('A');
    click(root, 'retry');
    await settle();
    // retry resubmits all three and advances; mock keeps the pre-failure post
    expect(server.preferences.length).toBeGreaterThanOrEqual(3);
    expect(text(root, 'progress')).toContain('Comparison 2 of 3');
  });

  it('DOM never contains system-identifying text', async () => {
    const forbidden = ['kg_guided', 'plain_baseline', 'hidden_assignment', 'system_1', 'system_2'];
    for (let round = 0; round < 3; round += 1) {
      const html = document.body.outerHTML.toLowerCase();
      const visible = document.body.textContent?.toLowerCase() ?? '';
      for (const token of forbidden) {
        expect(html).not.toContain(token);
        expect(visible).not.toContain(token);
      }
      for (const dimension of DIMENSIONS) click(root, `choice-${dimension}-A`);
      click(root, 'submit');
      await settle();
    }
    expect(document.body.outerHTML).not.toContain('hidden');
  });
});
