/** Session controller: queue advance, submission, keyboard shortcuts. */

import { fetchNext, isDone, postPreference } from './api.js';
import {
  allChosen,
  keyAction,
  moveFocus,
  newSession,
  setChoice,
  showComparison,
  showDone,
  type Choice,
  type SessionState,
} from './state.js';
import { render, type Handlers } from './view.js';

const ANNOTATOR_KEY = 'kgcot_annotator_id';

export class Controller {
  state: SessionState;
  private retryAction: (() => Promise<void>) | null = null;

  constructor(
    private root: HTMLElement,
    annotatorId: string,
  ) {
    this.state = newSession(annotatorId);
  }

  private handlers(): Handlers {
    return {
      onChoice: (dimension, choice) => this.choose(dimension, choice as Choice),
      onSubmit: () => void this.submit(),
      onRetry: () => void this.retry(),
    };
  }

  draw(): void {
    render(this.state, this.root, this.handlers());
  }

  choose(dimension: string, choice: Choice): void {
    setChoice(this.state, dimension, choice);
    const dims = this.state.payload?.dimensions ?? [];
    if (dims[this.state.focusIndex] === dimension) {
      moveFocus(this.state, 1);
    }
    this.draw();
  }

  async loadNext(): Promise<void> {
    try {
      const payload = await fetchNext(this.state.annotatorId);
      if (isDone(payload)) {
        showDone(this.state, payload.progress);
      } else {
        showComparison(this.state, payload);
      }
    } catch (error) {
      this.state.error = String(error instanceof Error ? error.message : error);
      this.retryAction = () => this.loadNext();
    }
    this.draw();
  }

  async submit(): Promise<void> {
    const payload = this.state.payload;
    if (!payload || !allChosen(this.state)) return;
    try {
      for (const dimension of payload.dimensions) {
        await postPreference({
          comparison_id: payload.comparison_id,
          annotator_id: this.state.annotatorId,
          dimension,
          choice: this.state.choices[dimension],
        });
      }
    } catch (error) {
      // choices stay in place so the annotator can retry the submission
      this.state.error = String(error instanceof Error ? error.message : error);
      this.retryAction = () => this.submit();
      this.draw();
      return;
    }
    await this.loadNext();
  }

  async retry(): Promise<void> {
    const action = this.retryAction;
    this.state.error = null;
    this.retryAction = null;
    if (action) {
      await action();
    } else {
      await this.loadNext();
    }
  }

  onKey(event: KeyboardEvent): void {
    const target = event.target as HTMLElement | null;
    if (target && ['INPUT', 'TEXTAREA', 'SELECT'].includes(target.tagName)) return;
    const action = keyAction(this.state, event.key);
    if (!action) return;
    event.preventDefault();
    if (action.kind === 'choose') {
      this.choose(action.dimension, action.choice);
    } else if (action.kind === 'focus') {
      moveFocus(this.state, action.delta);
      this.draw();
    } else {
      void this.submit();
    }
  }
}

function renderIdForm(root: HTMLElement, onStart: (annotatorId: string) => void): void {
  root.replaceChildren();
  const input = document.createElement('input');
  input.type = 'text';
  input.placeholder = 'annotator id';
  input.setAttribute('data-testid', 'annotator-input');
  const button = document.createElement('button');
  button.textContent = 'Start reviewing';
  button.setAttribute('data-testid', 'start-button');
  const begin = () => {
    const annotatorId = input.value.trim();
    if (annotatorId) onStart(annotatorId);
  };
  button.addEventListener('click', begin);
  input.addEventListener('keydown', (event) => {
    if (event.key === 'Enter') begin();
  });
  const form = document.createElement('div');
  form.className = 'id-form';
  form.append('Enter your annotator id to begin:', input, button);
  root.append(form);
}

export function boot(root: HTMLElement): Controller | null {
  const saved = window.localStorage.getItem(ANNOTATOR_KEY);
  let controller: Controller | null = null;
  const start = (annotatorId: string) => {
    window.localStorage.setItem(ANNOTATOR_KEY, annotatorId);
    controller = new Controller(root, annotatorId);
    document.addEventListener('keydown', (event) => controller?.onKey(event));
    void controller.loadNext();
  };
  if (saved) {
    start(saved);
  } else {
    renderIdForm(root, start);
  }
  return controller;
}

const appRoot = typeof document !== 'undefined' ? document.getElementById('app') : null;
if (appRoot && !appRoot.hasAttribute('data-no-autoboot')) {
  boot(appRoot);
}
