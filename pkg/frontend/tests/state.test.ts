import { describe, expect, it } from 'vitest';

import type { ComparisonPayload } from '../src/api.js';
import {
  allChosen,
  keyAction,
  moveFocus,
  newSession,
  setChoice,
  showComparison,
} from '../src/state.js';

const DIMS = ['clarity_coherence', 'coverage_relevance', 'correctness_soundness'];

function payload(ties = false): ComparisonPayload {
  return {
    comparison_id: 'c1',
    input_summary: 'summary',
    ground_truth: 1,
    side_a: { prediction: 'yes', trace: 't1' },
    side_b: { prediction: 'no', trace: 't2' },
    progress: { completed: 0, total: 3 },
    dimensions: DIMS,
    ties_enabled: ties,
  };
}

function comparisonState(ties = false) {
  const state = newSession('ann1');
  showComparison(state, payload(ties));
  return state;
}

describe('choice gating', () => {
  it('requires every dimension before submit', () => {
    const state = comparisonState();
    expect(allChosen(state)).toBe(false);
    setChoice(state, DIMS[0], 'A');
    setChoice(state, DIMS[1], 'B');
    expect(allChosen(state)).toBe(false);
    setChoice(state, DIMS[2], 'A');
    expect(allChosen(state)).toBe(true);
  });

  it('ignores unknown dimensions', () => {
    const state = comparisonState();
    setChoice(state, 'speed', 'A');
    expect(Object.keys(state.choices)).toHaveLength(0);
  });

  it('rejects ties when the server did not enable them', () => {
    const state = comparisonState(false);
    setChoice(state, DIMS[0], 'tie');
    expect(state.choices[DIMS[0]]).toBeUndefined();
    const tieState = comparisonState(true);
    setChoice(tieState, DIMS[0], 'tie');
    expect(tieState.choices[DIMS[0]]).toBe('tie');
  });

  it('allows correcting a choice', () => {
    const state = comparisonState();
    setChoice(state, DIMS[0], 'A');
    setChoice(state, DIMS[0], 'B');
    expect(state.choices[DIMS[0]]).toBe('B');
  });
});

describe('focus movement', () => {
  it('wraps in both directions', () => {
    const state = comparisonState();
    moveFocus(state, -1);
    expect(state.focusIndex).toBe(2);
    moveFocus(state, 1);
    expect(state.focusIndex).toBe(0);
  });
});

describe('keyboard protocol', () => {
  it('1 and 2 choose on the focused dimension', () => {
    const state = comparisonState();
    expect(keyAction(state, '1')).toEqual({
      kind: 'choose',
      dimension: DIMS[0],
      choice: 'A',
    });
    state.focusIndex = 2;
    expect(keyAction(state, '2')).toEqual({
      kind: 'choose',
      dimension: DIMS[2],
      choice: 'B',
    });
  });

  it('enter submits only when complete', () => {
    const state = comparisonState();
    expect(keyAction(state, 'Enter')).toBeNull();
    for (const dim of DIMS) setChoice(state, dim, 'A');
    expect(keyAction(state, 'Enter')).toEqual({ kind: 'submit' });
  });

  it('inactive outside the comparison view', () => {
    const state = newSession('ann1');
    expect(keyAction(state, '1')).toBeNull();
  });
});
