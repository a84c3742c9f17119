/** DOM rendering. The client never sees or derives which system is which;
 * it renders exactly the anonymized payload fields. */

import type { SessionState, Choice } from './state.js';
import { allChosen } from './state.js';

export interface Handlers {
  onChoice(dimension: string, choice: Choice): void;
  onSubmit(): void;
  onRetry(): void;
}

const DIMENSION_LABELS: Record<string, string> = {
  clarity_coherence: 'Clarity & Coherence',
  coverage_relevance: 'Coverage & Relevance',
  correctness_soundness: 'Correctness & Soundness',
};

function el(
  tag: string,
  attrs: Record<string, string> = {},
  children: (Node | string)[] = [],
): HTMLElement {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  for (const child of children) {
    node.append(child);
  }
  return node;
}

function dimensionLabel(dimension: string): string {
  return (
    DIMENSION_LABELS[dimension] ??
    dimension.split('_').join(' ').replace(/\b\w/g, (c: string) => c.toUpperCase())
  );
}

function sidePanel(side: 'a' | 'b', prediction: string, trace: string): HTMLElement {
  return el('section', { class: 'panel', 'data-testid': `panel-${side}` }, [
    el('h3', {}, [`Output ${side.toUpperCase()}`]),
    el('p', { class: 'prediction', 'data-testid': `prediction-${side}` }, [
      `Prediction: ${prediction}`,
    ]),
    el('pre', { class: 'trace', 'data-testid': `trace-${side}` }, [trace]),
  ]);
}

function choiceButton(
  dimension: string,
  choice: Choice,
  selected: boolean,
  handlers: Handlers,
): HTMLElement {
  const button = el(
    'button',
    {
      class: `choice${selected ? ' selected' : ''}`,
      'data-testid': `choice-${dimension}-${choice}`,
      'aria-pressed': String(selected),
    },
    [choice === 'tie' ? 'Tie' : choice],
  );
  button.addEventListener('click', () => handlers.onChoice(dimension, choice));
  return button;
}

export function render(state: SessionState, root: HTMLElement, handlers: Handlers): void {
  root.replaceChildren();

  if (state.error) {
    const retry = el('button', { 'data-testid': 'retry' }, ['Retry']);
    retry.addEventListener('click', () => handlers.onRetry());
    root.append(
      el('div', { class: 'banner', 'data-testid': 'error-banner' }, [
        `Request failed (${state.error}). Your choices are preserved. `,
        retry,
      ]),
    );
  }

  if (state.view === 'loading') {
    root.append(el('p', { 'data-testid': 'loading' }, ['Loading next comparison…']));
    return;
  }

  if (state.view === 'done') {
    const total = state.progress?.total ?? 0;
    root.append(
      el('div', { class: 'done', 'data-testid': 'done-screen' }, [
        el('h2', {}, ['All comparisons reviewed']),
        el('p', {}, [`You completed ${total} of ${total} comparisons. Thank you.`]),
      ]),
    );
    return;
  }

  const payload = state.payload;
  if (!payload) return;

  const progress = payload.progress;
  root.append(
    el('p', { class: 'progress', 'data-testid': 'progress' }, [
      `Comparison ${progress.completed + 1} of ${progress.total}`,
    ]),
  );
  root.append(
    el('section', { class: 'summary', 'data-testid': 'summary' }, [
      el('h2', {}, ['Case summary']),
      el('p', {}, [payload.input_summary]),
    ]),
  );
  root.append(
    el('p', { class: 'truth', 'data-testid': 'ground-truth' }, [
      'Observed next-visit outcome: ',
      el('strong', {}, [payload.ground_truth ? 'Yes' : 'No']),
    ]),
  );
  root.append(
    el('div', { class: 'panels' }, [
      sidePanel('a', payload.side_a.prediction, payload.side_a.trace),
      sidePanel('b', payload.side_b.prediction, payload.side_b.trace),
    ]),
  );

  const rows = payload.dimensions.map((dimension, index) => {
    const selected = state.choices[dimension];
    const buttons: HTMLElement[] = [
      choiceButton(dimension, 'A', selected === 'A', handlers),
      choiceButton(dimension, 'B', selected === 'B', handlers),
    ];
    if (payload.ties_enabled) {
      buttons.push(choiceButton(dimension, 'tie', selected === 'tie', handlers));
    }
    return el(
      'div',
      {
        class: `dimension${index === state.focusIndex ? ' focused' : ''}`,
        'data-testid': `dimension-${dimension}`,
      },
      [el('span', { class: 'label' }, [dimensionLabel(dimension)]), ...buttons],
    );
  });
  root.append(el('section', { class: 'dimensions' }, rows));

  const submit = el(
    'button',
    { class: 'submit', 'data-testid': 'submit' },
    ['Submit choices'],
  ) as HTMLButtonElement;
  submit.disabled = !allChosen(state);
  submit.addEventListener('click', () => handlers.onSubmit());
  root.append(submit);
  if (submit.disabled) {
    root.append(
      el('p', { class: 'hint', 'data-testid': 'submit-hint' }, [
        'Choose A or B for all three dimensions to submit.',
      ]),
    );
  }
  root.append(
    el('p', { class: 'hint' }, [
      'Keys: 1/2 choose A/B on the highlighted dimension, ↑/↓ move, Enter submits.',
    ]),
  );
}
