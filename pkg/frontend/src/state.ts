/** View state of the inspection panel and the strictly hierarchical
 * navigation over the three abstraction levels. Descending saves the current
 * state; ascending restores it exactly. */

export type Level = 'L3' | 'L2' | 'L1';

export const LEVEL_ORDER: Level[] = ['L3', 'L2', 'L1'];

export interface Viewport {
  x: number; // world coordinate at the screen origin
  y: number;
  zoom: number;
  width: number; // screen size in px
  height: number;
}

export interface ViewState {
  level: Level;
  focus: string; // unit path; '' is the root scope on L3
  viewport: Viewport;
  classes: number[];
  epoch: string; // 'latest' | '*' | integer string
  activeTool: string | null;
  showBadges: boolean;
  showInterestingness: boolean;
}

export function defaultViewport(width = 1200, height = 800): Viewport {
  return { x: 0, y: 0, zoom: 1, width, height };
}

export function initialViewState(width = 1200, height = 800): ViewState {
  return {
    level: 'L3',
    focus: '',
    viewport: defaultViewport(width, height),
    classes: [],
    epoch: 'latest',
    activeTool: null,
    showBadges: false,
    showInterestingness: false,
  };
}

export function cloneViewState(state: ViewState): ViewState {
  return {
    ...state,
    viewport: { ...state.viewport },
    classes: [...state.classes],
  };
}

export function deeper(level: Level): Level | null {
  const i = LEVEL_ORDER.indexOf(level);
  return i < LEVEL_ORDER.length - 1 ? LEVEL_ORDER[i + 1] : null;
}

/** Saves snapshots on descend so breadcrumb ascents restore them exactly. */
export class Navigation {
  private saved = new Map<Level, ViewState>();

  descend(current: ViewState, childFocus: string): ViewState {
    const next = deeper(current.level);
    if (next === null) throw new Error('already at the deepest level');
    this.saved.set(current.level, cloneViewState(current));
    return {
      ...cloneViewState(current),
      level: next,
      focus: childFocus,
      viewport: { ...defaultViewport(current.viewport.width, current.viewport.height) },
    };
  }

  ascendTo(current: ViewState, level: Level): ViewState {
    if (LEVEL_ORDER.indexOf(level) >= LEVEL_ORDER.indexOf(current.level)) {
      return cloneViewState(current);
    }
    const snapshot = this.saved.get(level);
    if (snapshot !== undefined) {
      // global settings made at the lower level carry over
      return {
        ...cloneViewState(snapshot),
        classes: [...current.classes],
        epoch: current.epoch,
        showBadges: current.showBadges,
        showInterestingness: current.showInterestingness,
      };
    }
    return {
      ...cloneViewState(current),
      level,
      focus: level === 'L3' ? '' : current.focus,
      viewport: { ...defaultViewport(current.viewport.width, current.viewport.height) },
    };
  }
}
