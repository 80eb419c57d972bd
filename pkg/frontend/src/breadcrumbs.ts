/** Breadcrumbs: the path to the focused unit over the abstraction levels.
 * Clicking a crumb teleports to that level, restoring its saved view. */

import type { Level, ViewState } from './state.js';
import { segmentId } from './uoa.js';

export interface Crumb {
  label: string;
  level: Level;
  focus: string;
}

export interface CrumbNames {
  experiment?: string;
  model?: string;
}

export function breadcrumbPath(state: ViewState, names: CrumbNames = {}): Crumb[] {
  const crumbs: Crumb[] = [
    { label: names.experiment ?? 'experiment', level: 'L3', focus: '' },
  ];
  if (state.level === 'L3') return crumbs;
  const model = state.focus ? segmentId(state.focus, 'model') : null;
  if (model !== null) {
    crumbs.push({ label: names.model ?? model, level: 'L2', focus: `model:${model}` });
  }
  if (state.level === 'L1') {
    const layer = state.focus ? segmentId(state.focus, 'layer') : null;
    if (layer !== null) {
      crumbs.push({ label: layer, level: 'L1', focus: state.focus });
    }
  }
  return crumbs;
}
