import { describe, expect, it } from 'vitest';

import { cloneViewState, initialViewState, Navigation } from '../src/state.js';

describe('navigation over abstraction levels', () => {
  it('descend then ascend restores the previous view state exactly', () => {
    const nav = new Navigation();
    const l3 = initialViewState();
    l3.viewport.x = 123.5;
    l3.viewport.y = -40;
    l3.viewport.zoom = 1.75;
    l3.classes = [0, 2];
    const before = cloneViewState(l3);

    const l2 = nav.descend(l3, 'model:m1');
    expect(l2.level).toBe('L2');
    expect(l2.focus).toBe('model:m1');

    const l1 = nav.descend(l2, 'model:m1/layer:hidden_1');
    expect(l1.level).toBe('L1');

    const backL2 = nav.ascendTo(l1, 'L2');
    expect(backL2).toEqual(l2);
    const backL3 = nav.ascendTo(backL2, 'L3');
    expect(backL3).toEqual(before);
  });

  it('descending resets the viewport for the lower level', () => {
    const nav = new Navigation();
    const l3 = initialViewState();
    l3.viewport.zoom = 2.5;
    const l2 = nav.descend(l3, 'model:m1');
    expect(l2.viewport.zoom).toBe(1);
    expect(l2.viewport.x).toBe(0);
  });

  it('breadcrumb ascent from L1 to L3 resets when nothing was saved', () => {
    const nav = new Navigation();
    const deep = { ...initialViewState(), level: 'L1' as const, focus: 'model:m/layer:l' };
    deep.viewport.x = 999;
    const top = nav.ascendTo(deep, 'L3');
    expect(top.level).toBe('L3');
    expect(top.focus).toBe('');
    expect(top.viewport.x).toBe(0);
  });

  it('global selections survive the round trip', () => {
    const nav = new Navigation();
    const l3 = initialViewState();
    const l2 = nav.descend(l3, 'model:m1');
    l2.classes = [1];
    l2.epoch = '2';
    const back = nav.ascendTo(l2, 'L3');
    expect(back.classes).toEqual([1]);
    expect(back.epoch).toBe('2');
  });
});
