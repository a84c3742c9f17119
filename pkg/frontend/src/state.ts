/** Pure session state: choices per dimension, keyboard focus, submit gate. */

import type { ComparisonPayload, Progress } from './api.js';

export type Choice = 'A' | 'B' | 'tie';

export type View = 'loading' | 'comparison' | 'done';

export interface SessionState {
  annotatorId: string;
  view: View;
  payload: ComparisonPayload | null;
  choices: Record<string, Choice>;
  focusIndex: number;
  progress: Progress | null;
  error: string | null;
}

export function newSession(annotatorId: string): SessionState {
  return {
    annotatorId,
    view: 'loading',
    payload: null,
    choices: {},
    focusIndex: 0,
    progress: null,
    error: null,
  };
}

export function showComparison(state: SessionState, payload: ComparisonPayload): void {
  state.view = 'comparison';
  state.payload = payload;
  state.choices = {};
  state.focusIndex = 0;
  state.progress = payload.progress;
  state.error = null;
}

export function showDone(state: SessionState, progress: Progress): void {
  state.view = 'done';
  state.payload = null;
  state.choices = {};
  state.progress = progress;
  state.error = null;
}

export function setChoice(state: SessionState, dimension: string, choice: Choice): void {
  if (!state.payload || !state.payload.dimensions.includes(dimension)) return;
  if (choice === 'tie' && !state.payload.ties_enabled) return;
  state.choices[dimension] = choice;
}

export function allChosen(state: SessionState): boolean {
  if (!state.payload) return false;
  return state.payload.dimensions.every((dimension) => dimension in state.choices);
}

export function moveFocus(state: SessionState, delta: number): void {
  if (!state.payload) return;
  const count = state.payload.dimensions.length;
  state.focusIndex = (state.focusIndex + delta + count) % count;
}

export type KeyAction =
  | { kind: 'choose'; dimension: string; choice: Choice }
  | { kind: 'submit' }
  | { kind: 'focus'; delta: number }
  | null;

/** Keyboard protocol: 1/2 choose A/B on the focused dimension (and advance),
 * arrows move focus, Enter submits once every dimension is chosen. */
export function keyAction(state: SessionState, key: string): KeyAction {
  if (state.view !== 'comparison' || !state.payload) return null;
  const dimension = state.payload.dimensions[state.focusIndex];
  if (key === '1') return { kind: 'choose', dimension, choice: 'A' };
  if (key === '2') return { kind: 'choose', dimension, choice: 'B' };
  if (key === 'ArrowDown' || key === 'j') return { kind: 'focus', delta: 1 };
  if (key === 'ArrowUp' || key === 'k') return { kind: 'focus', delta: -1 };
  if (key === 'Enter' && allChosen(state)) return { kind: 'submit' };
  return null;
}
