/** Shareable deep links: the view state round-trips through the URL query
 * string (level, focus, epoch, classes). */

import { initialViewState, type Level, type ViewState } from './state.js';

export function encodeViewState(state: ViewState): string {
  const params = new URLSearchParams();
  params.set('level', state.level);
  if (state.focus) params.set('focus', state.focus);
  if (state.epoch !== 'latest') params.set('epoch', state.epoch);
  if (state.classes.length > 0) params.set('classes', state.classes.join(','));
  if (state.showBadges) params.set('badges', '1');
  if (state.showInterestingness) params.set('interest', '1');
  return params.toString();
}

export function decodeViewState(query: string, width = 1200, height = 800): ViewState {
  const params = new URLSearchParams(query);
  const state = initialViewState(width, height);
  const level = params.get('level');
  if (level === 'L3' || level === 'L2' || level === 'L1') {
    state.level = level as Level;
  }
  state.focus = params.get('focus') ?? '';
  state.epoch = params.get('epoch') ?? 'latest';
  const classes = params.get('classes');
  state.classes = classes
    ? classes.split(',').filter((c) => c !== '').map((c) => parseInt(c, 10))
    : [];
  state.showBadges = params.get('badges') === '1';
  state.showInterestingness = params.get('interest') === '1';
  return state;
}
